from .io import load_dataset, parse_filename, read_ppm, save_dataset, write_ppm
from .resize import resize, resize_dataset, resize_partition
from .synthetic import IdentitySignature, generate_synthetic, render, sample_signature
from .types import Partition, ReidDataset
