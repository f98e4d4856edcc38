from ..types import AVPair, DataError, ProductExample
from .generate import generate_catalog, partial_labeling, stats
from .grammar import CatalogGrammar, Category, Slot, default_grammar
from .io import load_jsonl, save_jsonl
