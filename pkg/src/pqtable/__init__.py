"""Hash-table search over product-quantized codes.

Identifiers are filed under their PQ codes in hash tables; querying walks
candidate codes in ascending asymmetric distance (dividing long codes across
several tables and merging by counting), so results match a linear ADC scan
exactly while touching only a fraction of the database.
"""

from .dataset_io import pca_align, read_vecs, recall_at_r, synthesize, write_vecs
from .keygen import KeyGenerator, KeysExhausted, NonDuplicateQueue
from .opq import (
    OPQTable,
    Rotation,
    build_opqtable,
    identity_rotation,
    random_rotation,
    train_rotation,
)
from .quantizer import (
    Codebook,
    DistanceMatrix,
    adc_distance,
    adc_distances,
    build_distance_matrix,
    decode,
    encode,
    linear_adc_scan,
    quantization_error,
    subspace_codebook,
    train_codebook,
)
from .storage import load_codebook, load_index, save_codebook, save_index
from .tables import (
    MemoryEstimate,
    MultiPQTable,
    SimulatedHashing,
    SinglePQTable,
    SlotStore,
    build_table,
    estimate_memory,
    expected_hashings,
    fill_rate,
    pack_codes,
    plan_tables,
    simulate_uniform_hashing,
    slot_occupancy,
    table_codes,
    unpack_key,
)

__version__ = "0.1.0"

__all__ = [
    "Codebook",
    "DistanceMatrix",
    "KeyGenerator",
    "KeysExhausted",
    "MemoryEstimate",
    "MultiPQTable",
    "NonDuplicateQueue",
    "OPQTable",
    "Rotation",
    "SimulatedHashing",
    "SinglePQTable",
    "SlotStore",
    "adc_distance",
    "adc_distances",
    "build_distance_matrix",
    "build_opqtable",
    "build_table",
    "decode",
    "encode",
    "estimate_memory",
    "expected_hashings",
    "fill_rate",
    "identity_rotation",
    "linear_adc_scan",
    "load_codebook",
    "load_index",
    "pack_codes",
    "pca_align",
    "plan_tables",
    "quantization_error",
    "random_rotation",
    "read_vecs",
    "recall_at_r",
    "save_codebook",
    "save_index",
    "simulate_uniform_hashing",
    "slot_occupancy",
    "subspace_codebook",
    "synthesize",
    "table_codes",
    "train_codebook",
    "train_rotation",
    "unpack_key",
    "write_vecs",
]
