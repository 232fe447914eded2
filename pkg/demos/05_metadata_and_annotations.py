"""Clinical metadata, associated images, and slide-space annotations.

Everything optional lives behind the clinical-metadata block:
key-value attributes (ASCII or DICOM-tagged), labeled images such as
thumbnails, an ICC profile, and annotations placed in fractional
layer-0 tile coordinates that scale with the viewer's zoom.
"""

import irisfile as ir

thumb_pixels = ir.synthetic_source(3, [(1, 1)]).tile(0, 0, 0)
thumbnail = ir.PixelBuffer.from_array(thumb_pixels.to_array()[:48, :64],
                                      ir.PixelFormat.R8G8B8)

source = ir.synthetic_source(
    seed=21, layer_specs=[(2, 2), (4, 4)],
    attributes=[
        ir.AttributeInput("scanner", "synthetic rig 01"),
        ir.AttributeInput("stain", "H&E"),
        ir.AttributeInput((0x0010, 0x0010), "DOE^JANE",
                          key_format=ir.KeyFormat.DICOM_TAG),
    ],
    associated_images=[ir.AssociatedImageInput(ir.ImageLabel.THUMBNAIL, thumbnail)],
    icc=b"(an ICC color profile would go here)",
    annotations=[
        ir.AnnotationInput(1, ir.AnnotationType.TEXT_UTF8,
                           x=0.73, y=0.25, width=1.0, height=0.5,
                           raster_width=128, raster_height=64,
                           payload="suspicious region".encode()),
        ir.AnnotationInput(2, ir.AnnotationType.SVG,
                           x=0.1, y=0.1, width=0.2, height=0.2,
                           raster_width=64, raster_height=64,
                           payload=b"<svg>outline</svg>", parent_id=1),
    ],
    annotation_groups=[ir.GroupInput("tumor", (1, 2))],
)
report = ir.encode_slide(source)

with ir.open_slide(report.buffer) as slide:
    print("attribute keys:", slide.attribute_keys)
    for attr in slide.read_attributes():
        kind = ir.KeyFormat(attr.key_format).name
        print(f"  [{kind}] {attr.key} = {attr.value!r}")

    thumb, entry = slide.read_associated_image("THUMBNAIL")
    print(f"\nthumbnail: {thumb.width}x{thumb.height} {thumb.pixel_format.name}")
    print(f"ICC profile: {len(slide.read_icc_profile())} bytes")

    # Slide space spans [0, x_tiles] x [0, y_tiles] of layer 0; here a
    # 2x2 layer 0 gives [0.0, 2.0]. Mapping to view pixels is one
    # multiply by tile_dimension * zoom.
    print("\nslide space:", slide.layout.slide_space_size)
    for note in slide.read_annotations():
        rect = ir.SlideSpaceRect(note.x, note.y, note.width, note.height)
        for zoom in (1.0, 2.5):
            view = ir.to_view_pixels(rect, slide.tile_dimension, zoom)
            print(f"  annotation {note.identifier} at zoom {zoom}: "
                  f"x={view.x:.2f}px w={view.width:.2f}px "
                  f"(raster {note.raster_width}x{note.raster_height}, "
                  f"parent {note.parent_id})")

    for group in slide.read_annotation_groups():
        print(f"\ngroup {group.name!r}: members {list(group.members)}")
