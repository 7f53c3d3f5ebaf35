"""Core extraction: corpus tokens in, per-token vector bundles out.

Instances arrive as JSONL ({"instance_id","lemma","pos","tokens":[...],
"target_index"}); bundles leave as JSONL ({"instance_id","layers":{name:
[[...]]},"context_vector":[...]}), one vector per corpus token under the
first-subtoken alignment policy, so consumers never deal with subword
segmentation. Context vectors come from re-encoding the sentence with the
target token replaced by the tokenizer's mask token and reading the top
layer at the mask position.

Vectors are written as decimal text with 6 significant digits; extraction is
single-threaded and rerunning a spec reproduces its output byte for byte.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path


class ExtractError(Exception):
    """Base error for extraction problems."""


class AlignmentError(ExtractError):
    """A corpus token could not be aligned to any subtoken."""


class CapabilityError(ExtractError):
    """The encoder lacks a capability (e.g. no mask token for blanks)."""


@dataclass(frozen=True)
class Instance:
    instance_id: str
    lemma: str
    pos: str
    tokens: tuple[str, ...]
    target_index: int


@dataclass(frozen=True)
class ExtractionSpec:
    """What to extract: encoder, layer selection, batching, device."""

    encoder: str
    layers: str = "last4"  # "top", "last4", "all", or comma-separated indices
    batch_size: int = 8
    device: str = "cpu"
    alignment_policy: str = "first-subtoken"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ExtractError(f"batch size must be >= 1, got {self.batch_size}")
        if self.alignment_policy != "first-subtoken":
            raise ExtractError(
                f"unsupported alignment policy {self.alignment_policy!r}")


def load_instances(path) -> dict[str, Instance]:
    instances: dict[str, Instance] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            instance = Instance(
                instance_id=str(obj["instance_id"]),
                lemma=str(obj["lemma"]),
                pos=str(obj.get("pos", "")),
                tokens=tuple(str(t) for t in obj["tokens"]),
                target_index=int(obj["target_index"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ExtractError(f"{path}:{lineno}: {exc}") from None
        if not instance.tokens:
            raise ExtractError(f"{path}:{lineno}: tokens empty")
        if not 0 <= instance.target_index < len(instance.tokens):
            raise ExtractError(f"{path}:{lineno}: target index out of range")
        if instance.instance_id in instances:
            raise ExtractError(
                f"{path}:{lineno}: duplicate instance_id {instance.instance_id!r}")
        instances[instance.instance_id] = instance
    return instances


class Encoder:
    """A loaded tokenizer/model pair with layer bookkeeping."""

    def __init__(self, spec: ExtractionSpec):
        import torch
        from transformers import AutoModel, AutoTokenizer

        torch.set_num_threads(1)  # reduction order stays fixed across reruns
        self.spec = spec
        self.tokenizer = AutoTokenizer.from_pretrained(spec.encoder)
        if not self.tokenizer.is_fast:
            raise CapabilityError(
                f"encoder {spec.encoder!r} has no fast tokenizer; subtoken "
                "alignment needs word_ids()")
        self.model = AutoModel.from_pretrained(spec.encoder).to(spec.device)
        self.model.eval()
        self.n_layers = int(self.model.config.num_hidden_layers)
        self.dimension = int(self.model.config.hidden_size)
        self.layer_indices = self._resolve_layers(spec.layers)

    def _resolve_layers(self, layers: str) -> list[int]:
        # hidden_states index 0 is the embedding output, 1..n are the blocks
        top = self.n_layers
        if layers == "top":
            indices = [top]
        elif layers == "last4":
            if top < 4:
                raise ExtractError(
                    f"encoder has {top} layers, cannot select the last 4")
            indices = [top - 3, top - 2, top - 1, top]
        elif layers == "all":
            indices = list(range(0, top + 1))
        else:
            try:
                indices = [int(i) for i in layers.split(",")]
            except ValueError:
                raise ExtractError(f"bad layer selection {layers!r}") from None
            indices = [i if i >= 0 else top + 1 + i for i in indices]
            bad = [i for i in indices if not 0 <= i <= top]
            if bad:
                raise ExtractError(
                    f"layer indices {bad} do not exist (encoder has layers 0..{top})")
            indices = sorted(set(indices))
        return indices

    def layer_name(self, index: int) -> str:
        return f"layer_{index:02d}"

    def encode_batch(self, token_lists: list[list[str]]):
        """Hidden states and first-subtoken positions for each word.

        Returns (hidden_states tuple, positions) where positions[b][w] is the
        sequence index of word w's first subtoken, or None when the word
        produced no subtokens.
        """
        import torch

        encoding = self.tokenizer(
            token_lists, is_split_into_words=True, return_tensors="pt",
            padding=True, truncation=False)
        tensors = {k: v.to(self.spec.device) for k, v in encoding.items()}
        with torch.no_grad():
            output = self.model(**tensors, output_hidden_states=True)
        positions = []
        for b, tokens in enumerate(token_lists):
            word_ids = encoding.word_ids(batch_index=b)
            first: list[int | None] = [None] * len(tokens)
            for seq_index, word in enumerate(word_ids):
                if word is not None and first[word] is None:
                    first[word] = seq_index
            positions.append(first)
        return output.hidden_states, positions


def format_vector(values) -> str:
    return "[" + ",".join(f"{float(v):.6g}" for v in values) + "]"


def _bundle_line(instance_id, layer_names, layer_matrices, context_vector) -> str:
    layers = ",".join(
        "%s:[%s]" % (json.dumps(name), ",".join(format_vector(row) for row in matrix))
        for name, matrix in zip(layer_names, layer_matrices)
    )
    parts = ['"instance_id":%s' % json.dumps(instance_id), '"layers":{%s}' % layers]
    if context_vector is not None:
        parts.append('"context_vector":%s' % format_vector(context_vector))
    return "{%s}" % ",".join(parts)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _batches(items, size):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _token_vectors(encoder, instances):
    """Yield (instance, {layer_name: [vector,...]}) or AlignmentError per batch."""
    for batch in _batches(instances, encoder.spec.batch_size):
        hidden, positions = encoder.encode_batch([list(i.tokens) for i in batch])
        for b, instance in enumerate(batch):
            first = positions[b]
            missing = [w for w, p in enumerate(first) if p is None]
            if missing:
                yield instance, AlignmentError(
                    f"tokens at positions {missing} produced no subtokens")
                continue
            layers = {}
            for index in encoder.layer_indices:
                rows = [hidden[index][b, p].tolist() for p in first]
                layers[encoder.layer_name(index)] = rows
            yield instance, layers


def _context_vector(encoder, instance):
    mask = encoder.tokenizer.mask_token
    if mask is None:
        raise CapabilityError(
            f"encoder {encoder.spec.encoder!r} has no mask token; blank-slot "
            "context vectors are unavailable")
    tokens = list(instance.tokens)
    tokens[instance.target_index] = mask
    hidden, positions = encoder.encode_batch([tokens])
    p = positions[0][instance.target_index]
    if p is None:
        raise AlignmentError("mask token produced no subtoken")
    return hidden[-1][0, p].tolist()


def _run(instances_path, spec, out_path, with_layers, with_context):
    encoder = Encoder(spec)
    instances = list(load_instances(instances_path).values())
    lines: list[str] = []
    failures: list[tuple[str, str]] = []

    if with_layers:
        per_instance = list(_token_vectors(encoder, instances))
    else:
        per_instance = [(instance, {}) for instance in instances]

    for instance, layers in per_instance:
        if isinstance(layers, Exception):
            failures.append((instance.instance_id, str(layers)))
            continue
        for name, rows in layers.items():
            # hard alignment guarantee before anything is written
            assert len(rows) == len(instance.tokens), (
                f"{instance.instance_id}: layer {name} has {len(rows)} vectors "
                f"for {len(instance.tokens)} tokens")
        context = None
        if with_context:
            try:
                context = _context_vector(encoder, instance)
            except AlignmentError as exc:
                failures.append((instance.instance_id, str(exc)))
                continue
        lines.append(_bundle_line(instance.instance_id, list(layers),
                                  list(layers.values()), context))

    out_path = Path(out_path)
    _atomic_write(out_path, "".join(line + "\n" for line in lines))
    if failures:
        error_lines = [json.dumps({"instance_id": iid, "reason": reason})
                       for iid, reason in failures]
        _atomic_write(Path(str(out_path) + ".errors.jsonl"),
                      "".join(line + "\n" for line in error_lines))
    meta = {
        "encoder": spec.encoder,
        "layers": spec.layers,
        "layer_indices": encoder.layer_indices if with_layers else [],
        "dimension": encoder.dimension,
        "alignment_policy": spec.alignment_policy,
        "blank_mechanism": "mask-token-top-layer" if with_context else None,
        "written": len(lines),
        "skipped": len(failures),
        "vector_format": "decimal text, 6 significant digits",
    }
    _atomic_write(Path(str(out_path) + ".meta.json"),
                  json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return len(lines)


def extract(instances_path, spec: ExtractionSpec, out_path,
            with_context: bool = False) -> int:
    """Write one bundle per instance with per-token layer vectors.

    Instances whose tokens cannot be aligned are skipped and listed in a
    sidecar ``<out>.errors.jsonl``, never silently dropped. Returns the
    number of bundles written.
    """
    return _run(instances_path, spec, out_path, with_layers=True,
                with_context=with_context)


def extract_context_vectors(instances_path, spec: ExtractionSpec, out_path) -> int:
    """Write bundles carrying only the blank-slot context vector."""
    return _run(instances_path, spec, out_path, with_layers=False,
                with_context=True)
