"""Embedding exchange files and the embedding cache.

An embedding file pair is ``<name>.f32`` (row-major little-endian float32) plus
``<name>.json`` listing ``{identity, index}`` for every row. Embeddings of models
that psmlab does not implement can be probed by exporting them in this format.
"""

import dataclasses
import hashlib
import json
import logging
from collections.abc import Mapping
from pathlib import Path

import numpy as np
import numpy.typing as npt

from psmlab.cycle import ModelBundle, encode_batch
from psmlab.errors import ErrorKind, PsmError, fail
from psmlab.face_align import AlignedCorpus
from psmlab.outcome import Ok, Result, question, result

logger = logging.getLogger(__name__)

EMBEDDINGS_FORMAT = "psmlab-embeddings/1"


@dataclasses.dataclass(frozen=True, slots=True, eq=False)
class EmbeddingTable:
    """Rows of embeddings keyed by ``(identity, frame index)``."""

    identities: tuple[str, ...]
    indices: npt.NDArray[np.int64]
    values: npt.NDArray[np.float32]

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @classmethod
    def from_blocks(
        cls,
        blocks: Mapping[str, tuple[npt.NDArray[np.int64], npt.NDArray[np.float32]]],
    ) -> "EmbeddingTable":
        names = sorted(blocks)
        identities = tuple(i for i in names for _ in range(len(blocks[i][0])))
        indices = np.concatenate([blocks[i][0] for i in names]).astype(np.int64) if names else np.zeros(0, np.int64)
        if names:
            values = np.concatenate([blocks[i][1] for i in names]).astype(np.float32)
        else:
            values = np.zeros((0, 0), np.float32)
        return cls(identities, indices, values)

    def rows_for(self, identity: str, indices: npt.NDArray[np.int64]) -> Result[npt.NDArray[np.float32], PsmError]:
        """Embeddings of the given frames, in the given order."""
        lookup = {(i, int(k)): r for r, (i, k) in enumerate(zip(self.identities, self.indices, strict=True))}
        rows = [lookup.get((identity, int(k))) for k in indices]
        missing = [int(k) for k, r in zip(indices, rows, strict=True) if r is None]
        if missing:
            return fail(
                ErrorKind.SCHEMA_MISMATCH,
                f"embedding file has no row for {identity} frames {missing[:5]}",
                identity=identity,
                missing=len(missing),
            )
        return Ok(self.values[np.array(rows, dtype=np.int64)])

    def save(self, stem: Path) -> Result[Path, PsmError]:
        try:
            stem.parent.mkdir(parents=True, exist_ok=True)
            self.values.astype("<f4").tofile(stem.with_suffix(".f32"))
            manifest = {
                "format": EMBEDDINGS_FORMAT,
                "dim": self.dim,
                "rows": [{"identity": i, "index": int(k)} for i, k in zip(self.identities, self.indices, strict=True)],
            }
            stem.with_suffix(".json").write_text(json.dumps(manifest), encoding="utf-8")
        except OSError as e:
            return fail(ErrorKind.IO_FAILURE, f"cannot write embeddings {stem}: {e}")
        return Ok(stem)

    @classmethod
    def load(cls, stem: Path) -> Result["EmbeddingTable", PsmError]:
        """Read ``<stem>.json`` and ``<stem>.f32`` (either suffix may be given)."""
        stem = stem.with_suffix("")
        try:
            manifest = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
            flat = np.fromfile(stem.with_suffix(".f32"), dtype="<f4")
        except (OSError, ValueError) as e:
            return fail(ErrorKind.IO_FAILURE, f"cannot read embeddings {stem}: {e}")
        if manifest.get("format") != EMBEDDINGS_FORMAT or "dim" not in manifest or "rows" not in manifest:
            return fail(ErrorKind.SCHEMA_MISMATCH, f"{stem}.json is not a {EMBEDDINGS_FORMAT} manifest")
        dim, rows = int(manifest["dim"]), manifest["rows"]
        if flat.size != dim * len(rows):
            message = f"{stem}.f32 holds {flat.size} values for {len(rows)} rows of {dim}"
            return fail(ErrorKind.SCHEMA_MISMATCH, message)
        return Ok(
            cls(
                tuple(str(r["identity"]) for r in rows),
                np.array([int(r["index"]) for r in rows], dtype=np.int64),
                flat.reshape(len(rows), dim).astype(np.float32),
            ),
        )


def cache_key(bundle: ModelBundle, corpus: AlignedCorpus) -> str:
    """Digest of the bundle parameters and the corpus frame keys."""
    h = hashlib.sha256(bundle.digest().encode())
    for identity in corpus.identities:
        h.update(identity.encode())
        h.update(corpus.sequences[identity].indices.astype("<i8").tobytes())
    return h.hexdigest()[:32]


@result
def embed_corpus(
    bundle: ModelBundle,
    corpus: AlignedCorpus,
    cache_root: Path | None = None,
) -> Result[EmbeddingTable, PsmError]:
    """Embed every aligned frame with a frozen bundle, optionally through an on-disk cache.

    Args:
        bundle (ModelBundle): Encoder to run
        corpus (AlignedCorpus): Frames to embed
        cache_root (Path | None): Cache directory (``psmlab.config.cache_dir()`` in the CLI)

    Returns:
        Result[EmbeddingTable, PsmError]: One row per aligned frame
    """
    stem = cache_root / cache_key(bundle, corpus) if cache_root is not None else None
    if stem is not None and stem.with_suffix(".json").exists():
        cached = EmbeddingTable.load(stem)
        if cached.is_ok():
            logger.info("embeddings loaded from cache %s", stem)
            return cached
        logger.warning("ignoring unreadable cache entry %s: %s", stem, cached.unwrap_err())
    blocks = {}
    for identity in corpus.identities:
        seq = corpus.sequences[identity]
        blocks[identity] = (seq.indices, question(encode_batch(bundle, seq.pixels)))
    table = EmbeddingTable.from_blocks(blocks)
    if stem is not None:
        question(table.save(stem))
    return Ok(table)
