"""Pure numpy fallback for the compiled kernels in _kernels.pyx."""
import numpy as np


def typical_rows(book, seq, nb, lo, hi, max_hits=0):
    """Indices of codebook rows whose joint type with ``seq`` lies in [lo, hi] cellwise.

    Cell of the pair (book[r, i], seq[i]) is ``book[r, i] * nb + seq[i]``.
    With ``max_hits > 0`` only the first ``max_hits`` matching rows are returned.
    """
    book = np.asarray(book, dtype=np.int64)
    seq = np.asarray(seq, dtype=np.int64)
    m, n = book.shape
    if seq.shape[0] != n:
        raise ValueError("sequence length does not match codebook block length")
    k = lo.shape[0]
    if m == 0:
        return np.empty(0, dtype=np.int64)
    cells = book * nb + seq[None, :] + (np.arange(m, dtype=np.int64) * k)[:, None]
    counts = np.bincount(cells.ravel(), minlength=m * k).reshape(m, k)
    ok = np.all((counts >= lo) & (counts <= hi), axis=1)
    hits = np.flatnonzero(ok).astype(np.int64)
    if max_hits > 0:
        hits = hits[:max_hits]
    return hits
