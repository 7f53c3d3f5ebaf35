import json

import pytest

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
WORDS = ["the", "a", "his", "cat", "dog", "sat", "on", "mat", "paper",
         "coach", "read", "team", "big", "small", "green", "blue", "house",
         "tree", "game", "story", "un", "##believ", "##able", "bus", "field"]


@pytest.fixture(scope="session")
def tiny_encoder(tmp_path_factory):
    """A 4-layer BERT-style model with random (but fixed) weights on disk."""
    import torch
    from tokenizers.implementations import BertWordPieceTokenizer
    from transformers import BertConfig, BertModel, BertTokenizerFast

    root = tmp_path_factory.mktemp("tiny-encoder")
    vocab = {t: i for i, t in enumerate(SPECIALS + WORDS)}
    backend = BertWordPieceTokenizer(vocab=vocab, lowercase=True)
    tokenizer = BertTokenizerFast(tokenizer_object=backend)
    config = BertConfig(
        vocab_size=len(SPECIALS) + len(WORDS),
        hidden_size=32,
        num_hidden_layers=4,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(0)
    model = BertModel(config)
    model.eval()
    model.save_pretrained(root)
    tokenizer.save_pretrained(root)
    return str(root)


def write_instances(path, instances):
    lines = []
    for iid, tokens, target in instances:
        lines.append(json.dumps({
            "instance_id": iid, "lemma": tokens[target], "pos": "n",
            "tokens": list(tokens), "target_index": target,
        }))
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def many_instances(n=50):
    """Deterministic synthetic instances over the tiny vocabulary."""
    out = []
    for i in range(n):
        length = 3 + (i % 7)
        tokens = [WORDS[(i + j) % 20] for j in range(length)]
        out.append((f"inst.{i}", tokens, i % length))
    return out
