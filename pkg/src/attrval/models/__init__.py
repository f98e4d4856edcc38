from .base import MODEL_KINDS, BaseModel, IncompatibleCheckpoints, check_compatible, load_model
from .layers import ModelConfig
from .seq2seq import (
    Seq2SeqModel,
    Seq2SeqRecord,
    genae_decode,
    genae_decode_batch,
    genae_encode,
    genae_loss,
    genave_decode,
    genave_decode_batch,
    ground_values,
)
from .tagger import (
    OUTSIDE,
    TaggerModel,
    TagRecord,
    labels_to_pairs,
    tocave_predict,
    tocave_predict_batch,
    tocave_record,
    tocve_loss,
    tocve_predict,
    tocve_predict_batch,
    tocve_record,
)
