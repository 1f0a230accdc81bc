from .archive import decode_noise_dataset, encode_noise_dataset, read_noise_dataset, write_noise_dataset
from .checkpoint import (
    PERLIN_PROVENANCE,
    Checkpoint,
    decode_checkpoint,
    encode_checkpoint,
    params_equal,
    read_checkpoint,
    write_checkpoint,
)
from .csvio import emit_csv, parse_csv, read_csv, write_csv
from .idx import LabeledSet, decode_idx, encode_idx, load_idx, read_idx, write_idx
from .images import decode_pgm, encode_pgm, grid_layout, image_grid, read_pgm, write_image_grid
from .shapes import SHAPES, ShapesTask, make_shapes_dataset, make_split

__all__ = [
    "PERLIN_PROVENANCE",
    "SHAPES",
    "Checkpoint",
    "LabeledSet",
    "ShapesTask",
    "decode_checkpoint",
    "decode_idx",
    "decode_noise_dataset",
    "decode_pgm",
    "emit_csv",
    "encode_checkpoint",
    "encode_idx",
    "encode_noise_dataset",
    "encode_pgm",
    "grid_layout",
    "image_grid",
    "load_idx",
    "make_shapes_dataset",
    "make_split",
    "params_equal",
    "parse_csv",
    "read_checkpoint",
    "read_csv",
    "read_idx",
    "read_noise_dataset",
    "read_pgm",
    "write_checkpoint",
    "write_csv",
    "write_idx",
    "write_image_grid",
    "write_noise_dataset",
]
