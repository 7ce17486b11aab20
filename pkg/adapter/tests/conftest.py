import os

# Keep transformers away from the network; everything here is built
# locally at test time.
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TOKENIZERS_PARALLELISM", "false")

import pytest
from corpusgen import corpus_rows
from tokenizers import ByteLevelBPETokenizer
from transformers import (
    PreTrainedTokenizerFast,
    RobertaConfig,
    RobertaForSequenceClassification,
)


def save_tiny_model(out: str, tokenizer: PreTrainedTokenizerFast, num_labels: int):
    config = RobertaConfig(
        vocab_size=tokenizer.vocab_size,
        hidden_size=32,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=514,
        type_vocab_size=1,
        num_labels=num_labels,
        pad_token_id=tokenizer.pad_token_id,
        bos_token_id=0,
        eos_token_id=2,
    )
    model = RobertaForSequenceClassification(config)
    model.save_pretrained(out)
    return model


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """A local one-layer checkpoint: trained BPE tokenizer plus a
    5-class sequence-classification model, loadable fully offline."""
    out = tmp_path_factory.mktemp("tiny-ckpt")
    bpe = ByteLevelBPETokenizer()
    bpe.train_from_iterator(
        [row["code"] for row in corpus_rows(40)],
        vocab_size=300,
        min_frequency=1,
        special_tokens=["<s>", "<pad>", "</s>", "<unk>", "<mask>"],
    )
    bpe.save(str(out / "tokenizer.json"))
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_file=str(out / "tokenizer.json"),
        bos_token="<s>",
        eos_token="</s>",
        unk_token="<unk>",
        pad_token="<pad>",
        mask_token="<mask>",
        model_max_length=512,
    )
    tokenizer.save_pretrained(out)
    save_tiny_model(str(out), tokenizer, num_labels=5)
    return str(out)
