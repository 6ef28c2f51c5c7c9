import os

import pytest

os.environ.setdefault("HF_HUB_OFFLINE", "1")


def build_local_model(target_dir, hidden_size=384, seed=0):
    """Construct a small MiniLM-class (384-dim) sentence encoder offline.

    Random weights are fine for protocol-conformance tests: the bridge
    contract is about batching, normalization, dimensions and determinism,
    not retrieval quality. The wordpiece vocabulary covers ascii letters and
    digits so distinct texts produce distinct embeddings.
    """
    import torch
    from tokenizers import BertWordPieceTokenizer
    from transformers import BertConfig, BertModel, PreTrainedTokenizerFast

    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    letters = [chr(c) for c in range(ord("a"), ord("z") + 1)]
    digits = [str(d) for d in range(10)]
    vocab += letters + digits
    vocab += [f"##{piece}" for piece in letters + digits]

    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=0,
        num_attention_heads=4,
        intermediate_size=4 * hidden_size,
        max_position_embeddings=512,
    )
    torch.manual_seed(seed)
    model = BertModel(config)
    # untrained transformer outputs are strongly anisotropic (everything is
    # nearly parallel); zeroing the shared position/segment embeddings makes
    # token identity dominate so distinct texts get visibly distinct vectors
    with torch.no_grad():
        model.embeddings.position_embeddings.weight.zero_()
        model.embeddings.token_type_embeddings.weight.zero_()
    model.save_pretrained(target_dir)

    vocab_path = os.path.join(target_dir, "vocab.txt")
    with open(vocab_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(vocab) + "\n")
    wordpiece = BertWordPieceTokenizer(vocab=vocab_path, lowercase=True)
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=getattr(wordpiece, "_tokenizer", wordpiece),
        unk_token="[UNK]", pad_token="[PAD]", cls_token="[CLS]",
        sep_token="[SEP]", mask_token="[MASK]",
    )
    tokenizer.save_pretrained(target_dir)

    from sentence_transformers import SentenceTransformer, models

    word = models.Transformer(target_dir, max_seq_length=128)
    dim_accessor = getattr(word, "get_embedding_dimension", None) or getattr(
        word, "get_word_embedding_dimension"
    )
    pooling = models.Pooling(dim_accessor(), pooling_mode="mean")
    st_model = SentenceTransformer(modules=[word, pooling], device="cpu")
    st_dir = target_dir + "_st"
    st_model.save(st_dir)
    return st_dir


@pytest.fixture(scope="session")
def local_model_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("model")
    return build_local_model(str(base / "mini384"))
