"""The two-box counterexample and the second Duhamel iterate.

The datum is a sum of two box indicators in frequency,

    phi^(xi, mu) = a (chi_{D_1} + chi_{D_2}),   a = c^{-1} N^{-s},

with ``D_1 = [-N-c, -N] x [-2c, -c]`` and ``D_2 = [N+2c, N+3c] x [3c, 4c]``
and ``c ~ N^{-2}``.  The boxes have width ``c``, far below any affordable
grid spacing, so every object here is evaluated by Gauss-Legendre quadrature
on boxes.

The second derivative of the data-to-solution map at zero has Fourier
transform, up to unimodular factors,

    |u_2^(t, xi)| = |xi| |int K(t, R) phi^(xi_1) phi^(xi - xi_1) d xi_1|,
    K(t, R) = (e^{itR} - 1) / R,

with the resonance ``R = P(xi) - P(xi_1) - P(xi - xi_1)``.  Splitting by the
boxes holding ``xi_1`` and ``xi - xi_1`` gives the pieces I (both in
``D_1``), II (both in ``D_2``) and III (one in each).  I and II sit near
``|R| ~ N^3`` and decay like ``N^{-s-4}`` in ``dot H^s``; III sits near
``|R| ~ c N^2 ~ 1`` and behaves like ``N^{-4s-4}``.  All hidden constants are
1 and the unimodular ratio of the nonlinearity enters with modulus 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .estimates import EstimateReport, TrialRecord, log2_slope
from .resonance import gauss_nodes, resonance
from .spectral import GridSpec, SpectralField, random_field, sobolev_norm

__all__ = [
    "Box",
    "CounterexampleSpec",
    "BoxDatum",
    "build_phi",
    "resonance_on_supports",
    "duhamel_kernel",
    "U2Norms",
    "compute_u2_norms",
    "IllposedReport",
    "illposed_sweep",
    "CounterexampleVolumes",
    "counterexample_volumes",
    "xdot_contrast_ratio",
    "scaling_check",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[x0, x1] x [y0, y1]``."""

    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def __add__(self, other: "Box") -> "Box":
        return Box(self.x0 + other.x0, self.x1 + other.x1, self.y0 + other.y0, self.y1 + other.y1)

    def grid(self, n: int, splits: int = 1):
        """Tensor Gauss-Legendre nodes and weights, ``splits x splits`` panels."""
        gx, gw = gauss_nodes(n)
        ex = np.linspace(self.x0, self.x1, splits + 1)
        ey = np.linspace(self.y0, self.y1, splits + 1)
        x = (ex[:-1, None] + np.diff(ex)[:, None] * gx).ravel()
        wx = (np.diff(ex)[:, None] * gw).ravel()
        y = (ey[:-1, None] + np.diff(ey)[:, None] * gx).ravel()
        wy = (np.diff(ey)[:, None] * gw).ravel()
        X, Y = np.meshgrid(x, y, indexing="ij")
        return X.ravel(), Y.ravel(), np.outer(wx, wy).ravel()


@dataclass(frozen=True)
class CounterexampleSpec:
    """Parameters of the two-box counterexample.

    Parameters
    ----------
    N : float
        Large frequency, at least 8.
    s : float
        Sobolev index.
    c : float, optional
        Box width; defaults to ``N^{-2}``.  ``c N^2`` must lie in ``[1/4, 4]``.
    window : float
        Constant ``C`` of the modulation window ``|w_2| <= 2 + C c N^2`` of the
        middle factor in the bilinear counterexample.
    """

    N: float
    s: float = -1.5
    c: Optional[float] = None
    window: float = 1.0

    def __post_init__(self):
        if not self.N >= 8:
            raise ValueError("N must be at least 8")
        if self.c is None:
            object.__setattr__(self, "c", float(self.N) ** -2)
        if not 0.25 <= self.c * self.N ** 2 <= 4:
            raise ValueError("need c N^2 in [1/4, 4]")

    @property
    def D1(self) -> Box:
        N, c = self.N, self.c
        return Box(-N - c, -N, -2 * c, -c)

    @property
    def D2(self) -> Box:
        N, c = self.N, self.c
        return Box(N + 2 * c, N + 3 * c, 3 * c, 4 * c)

    @property
    def amplitude(self) -> float:
        return 1.0 / (self.c * self.N ** self.s)


@dataclass(frozen=True)
class BoxDatum:
    """``phi^ = amplitude * sum of box indicators``."""

    boxes: tuple
    amplitude: float

    def hs_norm(self, s: float, nodes: int = 8) -> float:
        """Homogeneous ``dot H^s`` norm by quadrature on the boxes (assumed disjoint)."""
        tot = 0.0
        for b in self.boxes:
            x, y, w = b.grid(nodes)
            tot += np.sum(w * (x * x + y * y) ** s)
        return float(self.amplitude * np.sqrt(tot))

    def scaled(self, a: float) -> "BoxDatum":
        return BoxDatum(self.boxes, self.amplitude * a)


def build_phi(spec: CounterexampleSpec) -> BoxDatum:
    """The two-box datum of ``spec``."""
    return BoxDatum((spec.D1, spec.D2), spec.amplitude)


def resonance_on_supports(spec: CounterexampleSpec, n: int = 12, same_box: bool = False) -> dict:
    """Statistics of ``|R|`` over ``xi_1 in D_1`` and ``xi - xi_1 in D_2`` on an ``n^4`` grid.

    With ``same_box`` both frequencies range over ``D_1``; then the reference
    scale is ``N^3`` instead of ``c N^2``.
    """
    b1 = spec.D1
    b2 = spec.D1 if same_box else spec.D2
    u = (np.arange(n) + 0.5) / n
    x1 = b1.x0 + (b1.x1 - b1.x0) * u
    y1 = b1.y0 + (b1.y1 - b1.y0) * u
    x2 = b2.x0 + (b2.x1 - b2.x0) * u
    y2 = b2.y0 + (b2.y1 - b2.y0) * u
    X1, Y1, X2, Y2 = np.meshgrid(x1, y1, x2, y2, indexing="ij")
    R = np.abs(resonance(X1 + X2, X1, Y1 + Y2, Y1))
    scale = spec.N ** 3 if same_box else spec.c * spec.N ** 2
    out = {"min": float(R.min()), "median": float(np.median(R)), "max": float(R.max()),
           "scale": float(scale)}
    out["max_over_min"] = out["max"] / out["min"]
    out["median_over_scale"] = out["median"] / scale
    out["verdict"] = bool(out["max_over_min"] <= 4 and 0.25 <= out["median_over_scale"] <= 4)
    return out


def duhamel_kernel(t, R) -> np.ndarray:
    """``(e^{itR} - 1) / R``, equal to ``it`` at ``R = 0``.

    Uses ``2i sin(tR/2) e^{itR/2} / R`` and a four-term series for
    ``|tR| < 1e-4``.
    """
    t = np.asarray(t, dtype=float)
    R = np.asarray(R, dtype=float)
    x = t * R
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, R)
    direct = 2j * np.sin(x / 2) * np.exp(0.5j * x) / safe
    ix = 1j * x
    series = 1j * t * (1 + ix / 2 + ix * ix / 6 + ix ** 3 / 24)
    return np.where(small, series, direct)


# ---------------------------------------------------------------------------
# second iterate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class U2Norms:
    """``dot H^s`` norms of the three pieces of the second iterate at one time."""

    N: float
    t: float
    I: float
    II: float
    III: float
    converged: bool = True


def _intersect(a: Box, b: Box) -> Box:
    return Box(max(a.x0, b.x0), min(a.x1, b.x1), max(a.y0, b.y0), min(a.y1, b.y1))


def _piece_norm(Da: Box, Db: Box, amp: float, s: float, t: float, nodes: int,
                envelope: bool = False) -> float:
    """``dot H^s`` norm of the piece with ``xi_1 in Da`` and ``xi - xi_1 in Db``.

    With ``envelope`` the kernel is replaced by its modulus bound
    ``min(t, 2 / |R|)``, which bounds the norm from above.
    """
    out = Da + Db
    # the overlap of Da with xi - Db is a tent in each output coordinate: split at the kinks
    X, Y, W = out.grid(nodes, splits=2)
    gx, gw = gauss_nodes(nodes)
    # inner box: Da intersected with (xi - Db), per output node
    lx = np.maximum(Da.x0, X - Db.x1)
    hx = np.minimum(Da.x1, X - Db.x0)
    ly = np.maximum(Da.y0, Y - Db.y1)
    hy = np.minimum(Da.y1, Y - Db.y0)
    wx = np.maximum(hx - lx, 0.0)
    wy = np.maximum(hy - ly, 0.0)
    x1 = lx[:, None, None] + wx[:, None, None] * gx[None, :, None]
    y1 = ly[:, None, None] + wy[:, None, None] * gx[None, None, :]
    wts = (wx * wy)[:, None, None] * gw[None, :, None] * gw[None, None, :]
    Xo = X[:, None, None]
    Yo = Y[:, None, None]
    R = resonance(Xo, x1, Yo, y1)
    if envelope:
        with np.errstate(divide="ignore"):
            kern = np.minimum(t, 2.0 / np.abs(R))
    else:
        kern = duhamel_kernel(t, R)
    inner = np.sum(wts * kern, axis=(1, 2)) * amp * amp
    r2 = X * X + Y * Y
    dens = r2 ** s * r2 * np.abs(inner) ** 2
    return float(np.sqrt(np.sum(W * dens)))


def compute_u2_norms(spec: CounterexampleSpec, t: float = 1.0, nodes: int = 8,
                     datum: Optional[BoxDatum] = None, check: bool = True,
                     envelope: bool = False) -> U2Norms:
    """Norms of I, II and III at time ``t``.

    With ``envelope`` every piece is replaced by the upper bound obtained
    from ``|K(t, R)| <= min(t, 2 / |R|)``.

    With ``check`` the quadrature is repeated with twice the nodes; if any
    norm moves by more than 1% a warning is issued and the refined values are
    returned.

    Raises
    ------
    ValueError
        Unless ``0 <= t <= 1``.
    """
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    amp = (datum or build_phi(spec)).amplitude
    if t == 0:
        return U2Norms(spec.N, 0.0, 0.0, 0.0, 0.0)

    def run(n):
        I = _piece_norm(spec.D1, spec.D1, amp, spec.s, t, n, envelope)
        II = _piece_norm(spec.D2, spec.D2, amp, spec.s, t, n, envelope)
        # both orderings of the mixed pair give the same integrand modulus
        III = 2 * _piece_norm(spec.D1, spec.D2, amp, spec.s, t, n, envelope)
        return np.array([I, II, III])

    vals = run(nodes)
    converged = True
    if check:
        fine = run(2 * nodes)
        if np.any(np.abs(fine - vals) > 0.01 * np.abs(fine)):
            warnings.warn(f"u2 quadrature at N = {spec.N} not converged with {nodes} nodes; "
                          f"using {2 * nodes}", RuntimeWarning)
            vals, converged = fine, False
    return U2Norms(spec.N, t, *map(float, vals), converged=converged)


@dataclass
class IllposedReport:
    """Per-``N`` piece norms, fitted slopes, resonance statistics and verdict."""

    s: float
    t: float
    rows: list = field(default_factory=list)
    envelope_rows: list = field(default_factory=list)
    resonance: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    envelope_slopes: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    verdict: bool = False

    def to_estimate_report(self) -> EstimateReport:
        rep = EstimateReport("illposed", {"s": self.s, "t": self.t})
        for i, r in enumerate(self.rows):
            rep.trials.append(TrialRecord.make(r.N, i, r.III, r.I, I=r.I, II=r.II, III=r.III))
        rep.summary = {**{f"slope_{k}": v for k, v in self.slopes.items()},
                       **{f"envelope_slope_{k}": v for k, v in self.envelope_slopes.items()},
                       **{f"expected_{k}": v for k, v in self.expected.items()}}
        rep.verdict = self.verdict
        return rep


def illposed_sweep(s: float = -1.5, N_list: Sequence[float] = (16, 32, 64, 128), t: float = 1.0,
                   nodes: int = 8, tolerance: float = 0.3) -> IllposedReport:
    """Slopes of the three pieces against ``log2 N``.

    Verdict: ``slope(III) = -4s-4``, ``slope(I) = slope(II) = -s-4`` within
    ``tolerance``, and ``III / I`` strictly increasing along the sweep.  The
    report also carries the envelope bounds of :func:`compute_u2_norms` and
    their slopes.  For I and II the kernel oscillates as ``sin(tR/2)`` with
    ``tR`` sweeping a range of fixed width across the output box, so their
    norms fluctuate below the envelope by an ``N``-dependent factor.

    Raises
    ------
    ValueError
        With fewer than four values of ``N`` or a non-geometric sweep.
    """
    N = np.asarray(N_list, dtype=float)
    if N.size < 4:
        raise ValueError("need at least four values of N")
    q = N[1:] / N[:-1]
    if np.any(q <= 1) or not np.allclose(q, q[0]):
        raise ValueError("N_list must be increasing and geometric")
    rep = IllposedReport(s, t)
    for n in N:
        spec = CounterexampleSpec(float(n), s)
        rep.rows.append(compute_u2_norms(spec, t, nodes))
        rep.envelope_rows.append(compute_u2_norms(spec, t, nodes, envelope=True))
        rep.resonance.append(resonance_on_supports(spec))
    logN = np.log2(N)
    for key in ("I", "II", "III"):
        rep.slopes[key] = log2_slope(logN, [getattr(r, key) for r in rep.rows])
        rep.envelope_slopes[key] = log2_slope(logN, [getattr(r, key) for r in rep.envelope_rows])
    rep.expected = {"I": -s - 4, "II": -s - 4, "III": -4 * s - 4}
    sep = np.array([r.III / r.I for r in rep.rows])
    rep.slopes["separation"] = log2_slope(logN, sep)
    ok = all(abs(rep.slopes[k] - rep.expected[k]) <= tolerance for k in ("I", "II", "III"))
    rep.verdict = bool(ok and np.all(np.diff(sep) > 0))
    return rep


# ---------------------------------------------------------------------------
# bilinear counterexample in dot X^{s,b}
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CounterexampleVolumes:
    """``L^2`` norms of the indicator functions f, g, h, by direct volume computation."""

    f: float
    g: float
    h: float


def _f_box(spec: CounterexampleSpec) -> Box:
    return spec.D1


def _h_box(spec: CounterexampleSpec) -> Box:
    c = spec.c
    return Box(c, 3 * c, c, 3 * c)


def _g_halfwidth(spec: CounterexampleSpec) -> float:
    return 2.0 + spec.window * spec.c * spec.N ** 2


def counterexample_volumes(spec: CounterexampleSpec) -> CounterexampleVolumes:
    """Norms of ``f`` (``D_1`` x ``w in [0, 1]``), ``g`` (``D_2`` x ``|w| <= 2 + C c N^2``)
    and ``h`` (``[c, 3c]^2`` x ``w in [0, 1]``)."""
    vf = _f_box(spec).area * 1.0
    vg = spec.D2.area * 2.0 * _g_halfwidth(spec)
    vh = _h_box(spec).area * 1.0
    return CounterexampleVolumes(float(np.sqrt(vf)), float(np.sqrt(vg)), float(np.sqrt(vh)))


def xdot_contrast_ratio(N: float, s: float = -1.5, b: float = 0.5, b_prime: float = 0.5,
                        window: float = 1.0, nodes: int = 6) -> float:
    """Dual-form ratio of the homogeneous bilinear estimate on the counterexample.

    Evaluates ``int K_0 f g h`` for the indicators of
    :func:`counterexample_volumes` and divides by ``||f|| ||g|| ||h||``.  The
    kernel is ``|xi|^{1+s} / (<w>^{b'} |xi_1|^s <w_1>^b |xi_2|^s <w_2>^b)`` with
    ``w_2 = w - w_1 + R``.  The ratio grows like ``N^{-4s-4}``.
    """
    spec = CounterexampleSpec(float(N), s, window=window)
    Dh, Df, Dg = _h_box(spec), _f_box(spec), spec.D2
    W = _g_halfwidth(spec)
    gx, gw = gauss_nodes(nodes)
    X, Y, Wo = Dh.grid(nodes, splits=2)
    total = 0.0
    for x, y, wo in zip(X, Y, Wo):
        # xi_1 ranges over Df intersected with xi - Dg
        inner = _intersect(Df, Box(x - Dg.x1, x - Dg.x0, y - Dg.y1, y - Dg.y0))
        if inner.x1 <= inner.x0 or inner.y1 <= inner.y0:
            continue
        x1, y1, w1 = inner.grid(nodes)
        R = resonance(x, x1, y, y1)
        r2 = np.hypot(x - x1, y - y1)
        spatial = np.hypot(x, y) ** (1 + s) / (np.hypot(x1, y1) ** s * r2 ** s)
        # modulation integrals: w, w_1 in [0, 1] with |w - w_1 + R| <= W
        ww = gx
        acc = np.zeros_like(R)
        for wv, wwt in zip(ww, gw):
            lo = np.clip(wv + R - W, 0.0, 1.0)
            hi = np.clip(wv + R + W, 0.0, 1.0)
            ln = hi - lo
            v1 = lo[:, None] + ln[:, None] * gx[None]
            w2 = wv - v1 + R[:, None]
            f = (1 + v1 ** 2) ** (-b / 2) * (1 + w2 ** 2) ** (-b / 2)
            acc += wwt * (1 + wv ** 2) ** (-b_prime / 2) * ln * (f @ gw)
        total += wo * np.sum(w1 * spatial * acc)
    v = counterexample_volumes(spec)
    return float(total / (v.f * v.g * v.h))


# ---------------------------------------------------------------------------
# scaling laws
# ---------------------------------------------------------------------------

def scaling_check(lambdas: Sequence[float] = (2, 4), grid: Optional[GridSpec] = None,
                  seed: int = 0) -> dict:
    """Norm invariance of the two scalings under exact spectral re-indexing.

    ``phi(x / lambda)`` on a box ``lambda`` times larger has the same
    coefficient array, so ``lambda^{-2} phi(x / lambda)`` (NV) and
    ``lambda^{-1} phi(x / lambda)`` (mNV) are represented exactly.  Returns
    the relative changes of the ``dot H^{-1}`` norm and the ``L^2`` norm.

    Raises
    ------
    ValueError
        If some ``lambda`` is not a positive power of 2 (or 1).
    """
    grid = grid or GridSpec(64, 64, 2 * np.pi * 4, 2 * np.pi * 4)
    rng = np.random.default_rng(seed)
    phi = random_field(grid, rng, grid.band_mask(2.0 / 3.0), real=True, mean_zero=True)
    base_nv = sobolev_norm(phi, -1.0, homogeneous=True)
    base_mnv = phi.l2_norm()
    out = {"lambda": [], "nv_change": [], "mnv_change": []}
    for lam in lambdas:
        e = np.log2(lam)
        if lam < 1 or e != np.round(e):
            raise ValueError(f"lambda = {lam} is not a power of 2")
        big = GridSpec(grid.nx, grid.ny, lam * grid.lx, lam * grid.ly)
        nv = SpectralField(big, phi.coeffs / lam ** 2, True)
        mnv = SpectralField(big, phi.coeffs / lam, True)
        out["lambda"].append(float(lam))
        out["nv_change"].append(abs(sobolev_norm(nv, -1.0, homogeneous=True) / base_nv - 1))
        out["mnv_change"].append(abs(mnv.l2_norm() / base_mnv - 1))
    out["verdict"] = bool(max(out["nv_change"] + out["mnv_change"], default=0.0) < 1e-10)
    return out
