"""End-to-end command-line flows and the exit-code contract."""

import hashlib
import json

import pytest

import irisfile as ir
from irisfile.cli import run


def invoke(capsys, *argv):
    code = run(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_create_then_validate_clean(tmp_path, capsys):
    out = tmp_path / "out.iris"
    code, text, _ = invoke(capsys, "create",
                           "--synthetic", "seed=7,layers=1x1:2x2:4x4",
                           "--format", "raw-test", str(out))
    assert code == 0
    assert "21 tiles" in text
    code, text, _ = invoke(capsys, "validate", str(out))
    assert code == 0
    assert "clean" in text


def test_corrupt_repair_pipeline(tmp_path, capsys):
    out, bad, fixed = (tmp_path / n for n in ("out.iris", "bad.iris", "fixed.iris"))
    assert invoke(capsys, "create", "--synthetic", "seed=7,layers=1x1:2x2:4x4",
                  "--format", "raw-test", str(out))[0] == 0
    assert invoke(capsys, "corrupt", str(out), "--zero-range", "0:46", str(bad))[0] == 0
    assert invoke(capsys, "validate", str(bad))[0] == 1
    assert invoke(capsys, "repair", str(bad), str(fixed))[0] == 0
    assert invoke(capsys, "validate", str(fixed))[0] == 0


def test_extract_matches_library_read(tmp_path, capsys):
    out = tmp_path / "out.iris"
    tile = tmp_path / "tile.bin"
    invoke(capsys, "create", "--synthetic", "seed=7,layers=1x1:2x2:4x4", str(out))
    code, _, _ = invoke(capsys, "extract", str(out), "--tile", "4",
                        "--out", str(tile))
    assert code == 0
    with ir.open_slide(str(out)) as slide:
        assert tile.read_bytes() == bytes(slide.read_tile_compressed(4))


def test_extract_sparse_tile_fails(tmp_path, capsys):
    out = tmp_path / "sparse.iris"
    invoke(capsys, "create", "--synthetic", "seed=1,layers=2x2", "--sparse", "1",
           str(out))
    code, _, err = invoke(capsys, "extract", str(out), "--tile", "1",
                          "--out", str(tmp_path / "t.bin"))
    assert code == 1
    assert "sparse" in err


def test_info_reports_consistent_facts(tmp_path, capsys):
    out = tmp_path / "info.iris"
    invoke(capsys, "create", "--synthetic", "seed=3,layers=1x1:2x2",
           "--sparse", "0,3", "--attr", "scanner=rig-7", str(out))
    code, text, _ = invoke(capsys, "info", str(out))
    assert code == 0
    assert "5 total, 2 sparse" in text
    assert "scanner" in text
    code, text, _ = invoke(capsys, "info", str(out), "--json")
    payload = json.loads(text)
    with ir.open_slide(str(out)) as slide:
        assert payload["total_tiles"] == slide.total_tiles == 5
        assert payload["sparse_tiles"] == slide.sparse_count == 2
        assert payload["attribute_keys"] == list(slide.attribute_keys)
        assert payload["encoding_format"] == "RAW_TEST"
        assert [tuple(d.values()) for d in payload["layers"]] == \
            [(e.x_tiles, e.y_tiles, e.scale) for e in slide.layout.layers]


def test_validate_json_schema(tmp_path, capsys):
    out, bad = tmp_path / "v.iris", tmp_path / "v_bad.iris"
    invoke(capsys, "create", "--synthetic", "seed=2,layers=1x1", str(out))
    invoke(capsys, "corrupt", str(out), "--flip-byte", "50", str(bad))
    code, text, _ = invoke(capsys, "validate", str(bad), "--json")
    assert code == 1
    payload = json.loads(text)
    assert payload["ok"] is False
    assert payload["level"] == "full"
    assert {f["code"] for f in payload["findings"]} & {"BAD_VALIDATION_TAG"}
    for finding in payload["findings"]:
        assert set(finding) == {"severity", "block_type", "offset", "code", "message"}


def test_validate_structure_level_flag(tmp_path, capsys):
    out = tmp_path / "s.iris"
    invoke(capsys, "create", "--synthetic", "seed=2,layers=1x1", str(out))
    code, text, _ = invoke(capsys, "validate", str(out), "--level", "structure",
                           "--json")
    assert code == 0
    assert json.loads(text)["level"] == "structure"


def test_repair_random_bytes_exit_code(tmp_path, capsys):
    import numpy as np
    noise = tmp_path / "noise.bin"
    noise.write_bytes(np.random.default_rng(0).integers(
        0, 256, 1 << 16, dtype=np.uint8).tobytes())
    code, _, err = invoke(capsys, "repair", str(noise), str(tmp_path / "out.iris"))
    assert code == 4
    assert "unrecoverable" in err


def test_repair_json_report(tmp_path, capsys):
    out, bad = tmp_path / "r.iris", tmp_path / "r_bad.iris"
    invoke(capsys, "create", "--synthetic", "seed=5,layers=1x1:2x2", str(out))
    invoke(capsys, "corrupt", str(out), "--zero-range", "0:46", str(bad))
    code, text, _ = invoke(capsys, "repair", str(bad),
                           str(tmp_path / "r_fixed.iris"), "--json")
    assert code == 0
    payload = json.loads(text)
    assert payload["tiles"]["salvaged"] == 5
    assert payload["tiles"]["lost"] == 0
    assert payload["candidates_found"] >= 4


def test_missing_file_is_io_error(tmp_path, capsys):
    code, _, err = invoke(capsys, "validate", str(tmp_path / "absent.iris"))
    assert code == 3
    assert "error" in err.lower()


def test_usage_error_exit_code(capsys):
    assert run(["no-such-command"]) == 2
    assert run([]) == 2


def test_truncate_mode(tmp_path, capsys):
    out, cut = tmp_path / "t.iris", tmp_path / "t_cut.iris"
    invoke(capsys, "create", "--synthetic", "seed=5,layers=2x2", str(out))
    invoke(capsys, "corrupt", str(out), "--truncate", "100000", str(cut))
    assert cut.stat().st_size == 100000
    assert invoke(capsys, "validate", str(cut))[0] == 1


def test_create_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.iris", tmp_path / "b.iris"
    for path in (a, b):
        invoke(capsys, "create", "--synthetic", "seed=9,layers=1x1:2x2",
               "--workers", "1", str(path))
    assert hashlib.sha256(a.read_bytes()).hexdigest() == \
        hashlib.sha256(b.read_bytes()).hexdigest()


def test_bench_human_and_json(tmp_path, capsys):
    out = tmp_path / "bench.iris"
    invoke(capsys, "create", "--synthetic", "seed=2,layers=2x2", str(out))
    code, text, _ = invoke(capsys, "bench", str(out), "--batch-size", "20",
                           "--batches", "3", "--seed", "1")
    assert code == 0
    assert "[" in text and "tiles/sec" in text
    code, text, _ = invoke(capsys, "bench", str(out), "--batch-size", "20",
                           "--batches", "3", "--json")
    payload = json.loads(text)
    assert set(payload["paths"]) == {"compressed", "decoded"}
    assert len(payload["paths"]["decoded"]["batch_rates_tiles_per_s"]) == 3


def test_create_with_workers_and_jpeg(tmp_path, capsys):
    pytest.importorskip("PIL")
    out = tmp_path / "j.iris"
    code, _, _ = invoke(capsys, "create", "--synthetic", "seed=4,layers=1x1:2x2",
                        "--format", "jpeg", "--quality", "85", "--workers", "4",
                        str(out))
    assert code == 0
    assert invoke(capsys, "validate", str(out))[0] == 0
