"""
Vocal tract length normalization.

A diagonal-covariance UBM is trained by EM on unwarped features; each
speaker's warp factor is then the grid point whose re-extracted features
score the highest average log-likelihood under that UBM.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import corpus_io, frontend
from .errors import FormatError, ZrkitError
from .parallel import chunked, map_ordered

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)
_ESTEP_BLOCK = 2048
_ABS_VAR_FLOOR = 1e-8


def default_warp_grid():
    return tuple(round(0.80 + 0.02 * k, 2) for k in range(21))


@dataclass(frozen=True)
class VtlnConfig:
    n_components: int = 64
    em_iterations: int = 10
    variance_floor_fraction: float = 1e-3
    training_passes: int = 3
    recenter: bool = True
    warp_grid: tuple = field(default_factory=default_warp_grid)

    def __post_init__(self):
        grid = tuple(float(a) for a in self.warp_grid)
        object.__setattr__(self, "warp_grid", grid)
        if 1.0 not in grid:
            raise ZrkitError("warp grid must contain 1.0")
        if list(grid) != sorted(grid) or len(set(grid)) != len(grid):
            raise ZrkitError("warp grid must be strictly ascending")
        if self.n_components < 1 or self.em_iterations < 1 or self.training_passes < 1:
            raise ZrkitError("n_components, em_iterations and training_passes must be >= 1")
        if not self.variance_floor_fraction > 0:
            raise ZrkitError("variance_floor_fraction must be positive")


@dataclass
class DiagonalGmm:
    weights: np.ndarray     # K
    means: np.ndarray       # K x D
    variances: np.ndarray   # K x D
    variance_floor: np.ndarray = None
    log_likelihoods: list = field(default_factory=list)

    @property
    def n_components(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.means.shape[1]


# ---------------------------------------------------------------------------
# likelihoods

def component_log_densities(gmm, frames):
    """N x K matrix of ``log w_k + log N(x_n; mu_k, diag var_k)``."""
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != gmm.dim:
        raise ZrkitError(f"frames of shape {x.shape} do not match GMM dim {gmm.dim}")
    prec = 1.0 / gmm.variances
    const = (np.log(gmm.weights)
             - 0.5 * (gmm.dim * _LOG_2PI + np.sum(np.log(gmm.variances), axis=1)
                      + np.sum(gmm.means ** 2 * prec, axis=1)))
    quad = (x ** 2) @ prec.T - 2.0 * x @ (gmm.means * prec).T
    return const[None, :] - 0.5 * quad


def frame_log_likelihoods(gmm, frames):
    return logsumexp(component_log_densities(gmm, frames), axis=1)


def average_log_likelihood(gmm, frames):
    """Mean per-frame log-likelihood (log-sum-exp over components)."""
    return float(np.mean(frame_log_likelihoods(gmm, frames)))


# ---------------------------------------------------------------------------
# training

def _kmeans_pp(x, k, rng):
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[c]) ** 2, axis=1))
    return centers


def _assign(x, centers):
    d = (np.sum(x ** 2, axis=1)[:, None] - 2.0 * x @ centers.T
         + np.sum(centers ** 2, axis=1)[None, :])
    return np.argmin(d, axis=1)


def kmeans(x, k, rng, iterations=5):
    """k-means++ seeding followed by `iterations` Lloyd steps."""
    centers = _kmeans_pp(x, k, rng)
    for _ in range(iterations):
        labels = _assign(x, centers)
        for c in range(k):
            members = x[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return centers, _assign(x, centers)


def _estep_stats(gmm, x, jobs):
    """Zeroth, first and second order statistics plus total log-likelihood.

    Blocks are fixed-size and summed in block order regardless of `jobs`.
    """
    blocks = [(lo, min(lo + _ESTEP_BLOCK, len(x))) for lo in range(0, len(x), _ESTEP_BLOCK)]

    def stats(block):
        xb = x[block[0]:block[1]]
        logp = component_log_densities(gmm, xb)
        ll = logsumexp(logp, axis=1)
        if not np.all(np.isfinite(ll)):
            bad = int(np.flatnonzero(~np.isfinite(ll))[0]) + block[0]
            raise ZrkitError(f"frame {bad} has zero likelihood under every component")
        post = np.exp(logp - ll[:, None])
        return post.sum(axis=0), post.T @ xb, post.T @ (xb ** 2), float(ll.sum())

    parts = map_ordered(stats, blocks, jobs)
    n_k = np.zeros(gmm.n_components)
    f_k = np.zeros_like(gmm.means)
    s_k = np.zeros_like(gmm.means)
    total = 0.0
    for a, b, c, d in parts:
        n_k += a
        f_k += b
        s_k += c
        total += d
    return n_k, f_k, s_k, total


def _mstep(gmm, n_k, f_k, s_k, floor):
    safe = n_k > 1e-10
    means = gmm.means.copy()
    variances = gmm.variances.copy()
    means[safe] = f_k[safe] / n_k[safe, None]
    variances[safe] = s_k[safe] / n_k[safe, None] - means[safe] ** 2
    variances = np.maximum(variances, floor[None, :])
    weights = np.maximum(n_k, 1e-10)
    weights = weights / weights.sum()
    return DiagonalGmm(weights, means, variances, floor, gmm.log_likelihoods)


def variance_floor(x, fraction):
    return np.maximum(fraction * np.var(x, axis=0), _ABS_VAR_FLOOR)


def train_ubm(frames, config=VtlnConfig(), seed=0, jobs=1):
    """Fit a diagonal GMM by k-means initialization and a fixed number of EM steps.

    ``gmm.log_likelihoods`` holds the total data log-likelihood of the
    initial model followed by one entry per EM iteration.
    """
    x = np.ascontiguousarray(frames, dtype=np.float64)
    k = config.n_components
    if x.ndim != 2 or x.shape[1] < 1:
        raise ZrkitError("training frames must be an N x D matrix with D >= 1")
    if len(x) < 10 * k:
        raise ZrkitError(f"{len(x)} frames is too few for {k} components (need {10 * k})")
    rng = np.random.default_rng(seed)
    floor = variance_floor(x, config.variance_floor_fraction)
    centers, labels = kmeans(x, k, rng)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    variances = np.tile(np.var(x, axis=0), (k, 1))
    for c in range(k):
        members = x[labels == c]
        if len(members) > 1:
            variances[c] = members.var(axis=0)
    gmm = DiagonalGmm(np.maximum(counts, 1.0) / np.maximum(counts, 1.0).sum(),
                      centers, np.maximum(variances, floor[None, :]), floor, [])
    for it in range(config.em_iterations):
        n_k, f_k, s_k, total = _estep_stats(gmm, x, jobs)
        gmm.log_likelihoods.append(total)
        gmm = _mstep(gmm, n_k, f_k, s_k, floor)
        log.debug("EM iteration %d: log-likelihood %.6f", it, total)
    gmm.log_likelihoods.append(float(np.sum(frame_log_likelihoods(gmm, x))))
    return gmm


# ---------------------------------------------------------------------------
# warp estimation

def _select_warp(scores, grid):
    best = max(scores)
    tied = [a for a, s in zip(grid, scores) if s == best]
    return min(tied, key=lambda a: (abs(a - 1.0), a))


def _speaker_spectra(manifest, speaker, frontend_config):
    utts = [e for e in manifest if e.speaker_id == speaker]
    if not utts:
        raise ZrkitError(f"speaker {speaker!r} has no utterances")
    return [frontend.spectra_from_samples(frontend.load_samples(e, frontend_config),
                                          frontend_config) for e in utts]


def speaker_warp_scores(spectra, ubm, frontend_config, grid, banks=None):
    """Average log-likelihood of one speaker's CMN features at every grid warp."""
    scores = []
    for alpha in grid:
        fb = banks[alpha] if banks is not None else frontend.build_filterbank(frontend_config, alpha)
        feats = np.concatenate([frontend.features_from_spectra(s, frontend_config, fb).frames
                                for s in spectra])
        if len(feats) == 0:
            raise ZrkitError("speaker with zero frames")
        feats = feats - feats.mean(axis=0)
        scores.append(average_log_likelihood(ubm, feats))
    return scores


def estimate_warps(manifest, ubm, frontend_config=frontend.FrontendConfig(),
                   vtln_config=VtlnConfig(), jobs=1):
    """Maximum-likelihood warp factor per speaker.

    Ties go to the warp closest to 1.0, then to the smaller warp.
    """
    grid = vtln_config.warp_grid
    banks = {a: frontend.build_filterbank(frontend_config, a) for a in grid}

    def one(speaker):
        spectra = _speaker_spectra(manifest, speaker, frontend_config)
        scores = speaker_warp_scores(spectra, ubm, frontend_config, grid, banks)
        return _select_warp(scores, grid)

    speakers = manifest.speakers()
    return dict(zip(speakers, map_ordered(one, speakers, jobs)))


def apply_vtln(manifest, warps, frontend_config=frontend.FrontendConfig(), jobs=1):
    """Re-extract features with each speaker's warp, then per-speaker CMN."""
    return frontend.extract_corpus(manifest, frontend_config, warps=warps, cmn=True, jobs=jobs)


def train_vtln(manifest, frontend_config=frontend.FrontendConfig(),
               vtln_config=VtlnConfig(), seed=0, jobs=1):
    """Train the VTLN reference UBM on a manifest.

    The first pass fits the UBM to unwarped CMN features. Each further pass
    estimates warps under the current UBM and refits it on the warped
    features. Returns ``(ubm, warps)`` where `warps` are the estimates made
    under the final UBM. With ``vtln_config.recenter`` every pass's warps
    are passed through :func:`recenter_warps` before use.
    """
    def estimate(ubm):
        warps = estimate_warps(manifest, ubm, frontend_config, vtln_config, jobs)
        if vtln_config.recenter:
            warps = recenter_warps(warps, vtln_config.warp_grid)
        return warps

    archive = frontend.extract_corpus(manifest, frontend_config, cmn=True, jobs=jobs)
    ubm = train_ubm(np.concatenate([s.frames for s in archive]), vtln_config, seed, jobs)
    warps = estimate(ubm)
    for n in range(1, vtln_config.training_passes):
        log.info("VTLN pass %d warps: %s", n, warps)
        archive = apply_vtln(manifest, warps, frontend_config, jobs)
        ubm = train_ubm(np.concatenate([s.frames for s in archive]), vtln_config, seed, jobs)
        warps = estimate(ubm)
    return ubm, warps


def recenter_warps(warps, grid):
    """Divide warps by their geometric mean and snap back onto `grid`.

    The UBM only defines warps up to a common factor, and refitting it on
    warped features lets that factor drift. Re-centering pins the average
    speaker to 1.0. Snapping ties go to the value nearer 1.0, then the
    smaller one.
    """
    if not warps:
        return {}
    grid = np.asarray(grid, dtype=np.float64)
    spks = sorted(warps)
    shift = np.mean(np.log([warps[s] for s in spks]))
    out = {}
    for spk in warps:
        target = warps[spk] / np.exp(shift)
        dist = np.round(np.abs(grid - target), 9)
        tied = grid[dist == dist.min()]
        out[spk] = float(min(tied, key=lambda a: (abs(a - 1.0), a)))
    return out


# ---------------------------------------------------------------------------
# serialization

def write_warps(warps, path):
    with open(path, "w", encoding="utf-8") as fh:
        for spk, alpha in warps.items():
            fh.write(f"{spk}\t{float(alpha)!r}\n")


def read_warps(path, grid=None):
    warps = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError("expected 'speaker<TAB>alpha'", path, lineno)
            try:
                alpha = float(fields[1])
            except ValueError:
                raise FormatError(f"non-numeric warp {fields[1]!r}", path, lineno) from None
            if grid is not None and alpha not in grid:
                raise FormatError(f"warp {alpha} is not on the configured grid", path, lineno)
            warps[fields[0]] = alpha
    return warps


def write_gmm(gmm, path):
    corpus_io.write_records([
        ("__weights__", gmm.weights[None, :], 0.0, 0.0),
        ("__means__", gmm.means, 0.0, 0.0),
        ("__vars__", gmm.variances, 0.0, 0.0),
    ], path)


def read_gmm(path):
    recs = {r[0]: r[1].astype(np.float64) for r in corpus_io.read_records(path)}
    try:
        w, m, v = recs["__weights__"].ravel(), recs["__means__"], recs["__vars__"]
    except KeyError as exc:
        raise FormatError(f"GMM container lacks record {exc}", path) from None
    if m.shape != v.shape or m.shape[0] != len(w):
        raise FormatError("inconsistent GMM record shapes", path)
    return DiagonalGmm(w / w.sum(), m, v)
