"""Character-level typographical noise.

Scans text left to right; every ASCII letter or digit independently
mutates with probability p, choosing uniformly among delete, insert,
substitute, and swap-with-next. Inserted and substituted characters come
from the mutated key's neighbors on a simplified QWERTY grid. Whitespace,
punctuation, and non-ASCII characters are never touched. Each corpus line
draws from its own Philox substream keyed by (seed, line index), so output
is independent of processing order.
"""

from dataclasses import dataclass
from pathlib import Path

from .errors import DataError
from .rand import PERTURB_STREAM_BASE, stream

QWERTY_LAYOUT_VERSION = 1

# Staggered 4-row grid: a key at column c neighbors columns c-1/c+1 in its
# own row, c and c+1 in the row above, and c-1 and c in the row below.
_QWERTY_ROWS = ("1234567890", "qwertyuiop", "asdfghjkl", "zxcvbnm")


def _build_neighbors():
    neighbors = {}
    for r, row in enumerate(_QWERTY_ROWS):
        for c, key in enumerate(row):
            near = []
            for cc in (c - 1, c + 1):
                if 0 <= cc < len(row):
                    near.append(row[cc])
            if r > 0:
                above = _QWERTY_ROWS[r - 1]
                for cc in (c, c + 1):
                    if 0 <= cc < len(above):
                        near.append(above[cc])
            if r + 1 < len(_QWERTY_ROWS):
                below = _QWERTY_ROWS[r + 1]
                for cc in (c - 1, c):
                    if 0 <= cc < len(below):
                        near.append(below[cc])
            neighbors[key] = "".join(sorted(near))
    return neighbors


QWERTY_NEIGHBORS = _build_neighbors()


@dataclass(frozen=True)
class NoiseConfig:
    p: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"mutation probability must lie in [0, 1], got {self.p}")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass
class PerturbStats:
    lines: int = 0
    eligible: int = 0
    mutations: int = 0

    @property
    def rate(self):
        return self.mutations / self.eligible if self.eligible else 0.0


def _eligible(c):
    return c.isascii() and c.isalnum()


def _mutate_line(text, rng, p):
    out = []
    eligible = 0
    mutations = 0
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if not _eligible(c):
            out.append(c)
            i += 1
            continue
        eligible += 1
        if p <= 0.0 or rng.random() >= p:
            out.append(c)
            i += 1
            continue
        mutations += 1
        op = rng.integers(4)
        if op == 0:  # delete
            i += 1
        elif op == 1:  # insert a neighboring key after the original
            nb = QWERTY_NEIGHBORS[c.lower()]
            out.append(c)
            out.append(nb[rng.integers(len(nb))])
            i += 1
        elif op == 2:  # substitute, preserving case
            nb = QWERTY_NEIGHBORS[c.lower()]
            repl = nb[rng.integers(len(nb))]
            out.append(repl.upper() if c.isupper() else repl)
            i += 1
        else:  # swap with the next character; no-op unless it is eligible too
            if i + 1 < n and _eligible(text[i + 1]):
                out.append(text[i + 1])
                out.append(c)
                i += 2
            else:
                out.append(c)
                i += 1
    return "".join(out), eligible, mutations


def _line_rng(cfg, line_index):
    return stream(cfg.seed, PERTURB_STREAM_BASE + line_index)


def perturb_text(text, cfg, line_index=0):
    """Perturbed copy of one document; line_index selects the substream."""
    out, _, _ = _mutate_line(text, _line_rng(cfg, line_index), cfg.p)
    return out


def perturb_text_stats(text, cfg, line_index=0):
    out, eligible, mutations = _mutate_line(text, _line_rng(cfg, line_index), cfg.p)
    return out, PerturbStats(1, eligible, mutations)


def perturb_corpus(input_path, output_path, cfg):
    """Perturb a newline-delimited corpus file; returns processing stats.

    Line structure (including a trailing newline) is preserved; line i
    always uses substream i regardless of content.
    """
    input_path, output_path = Path(input_path), Path(output_path)
    try:
        text = input_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read corpus {input_path}: {exc}") from exc
    stats = PerturbStats()
    if text:
        trailing = text.endswith("\n")
        lines = text.split("\n")
        if trailing:
            lines = lines[:-1]
        out_lines = []
        for i, line in enumerate(lines):
            mutated, eligible, mutations = _mutate_line(line, _line_rng(cfg, i), cfg.p)
            out_lines.append(mutated)
            stats.eligible += eligible
            stats.mutations += mutations
        stats.lines = len(lines)
        payload = "\n".join(out_lines) + ("\n" if trailing else "")
    else:
        payload = ""
    try:
        output_path.write_text(payload, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write corpus {output_path}: {exc}") from exc
    return stats
