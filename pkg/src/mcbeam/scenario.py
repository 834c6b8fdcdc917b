"""System configuration, random channel generation and scenario files.

Channels are drawn from the Philox counter-based generator, so a scenario
file's (model, seed) pair reproduces the same channels on any platform
with the same generator.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ParseError

# cell-edge (unit distance) average received SNR for pathloss channels, dB
EDGE_SNR_DB = -5.0
PATHLOSS_EXPONENT = 3.0
ANNULUS = (0.1, 1.0)  # user distances, normalized cell radius


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass
class SystemConfig:
    """Problem dimensions and targets.

    gamma holds per-user SINR targets in linear scale, grouped like the
    channels; P is the transmit power budget used by the max-min problem.
    """

    G: int
    K: list
    N: int
    gamma: list
    sigma2: float = 1.0
    P: float = 10.0

    def __post_init__(self):
        if self.G < 1 or self.N < 1 or any(k < 1 for k in self.K):
            raise DimensionMismatch("G, N and all K_i must be >= 1")
        if len(self.K) != self.G or len(self.gamma) != self.G:
            raise DimensionMismatch("K and gamma must have one entry per group")
        self.gamma = [np.atleast_1d(np.asarray(g, dtype=float)) for g in self.gamma]
        for k, g in zip(self.K, self.gamma):
            if g.shape != (k,):
                raise DimensionMismatch("gamma shape does not match K")
            if np.any(g <= 0):
                raise ValueError("SINR targets must be positive")
        if self.sigma2 <= 0 or self.P <= 0:
            raise ValueError("sigma2 and P must be positive")

    @property
    def K_tot(self) -> int:
        return int(sum(self.K))

    def gamma_flat(self) -> np.ndarray:
        return np.concatenate(self.gamma)

    def scaled_targets(self, t: float) -> list:
        return [t * g for g in self.gamma]

    def with_targets(self, gamma: list) -> "SystemConfig":
        return SystemConfig(G=self.G, K=list(self.K), N=self.N,
                            gamma=[np.array(g) for g in gamma],
                            sigma2=self.sigma2, P=self.P)

    def equal_target(self) -> float:
        g = self.gamma_flat()
        if not np.allclose(g, g[0], rtol=0, atol=0):
            from .errors import UnequalTargets
            raise UnequalTargets("a common SINR target is required here")
        return float(g[0])


def make_config(G=3, K=5, N=100, gamma_db=10.0, sigma2=1.0, P=10.0) -> SystemConfig:
    """Convenience constructor; K and gamma_db may be scalars or per-group/user."""
    K_list = [int(K)] * G if np.isscalar(K) else [int(k) for k in K]
    if np.isscalar(gamma_db):
        gamma = [np.full(k, db2lin(gamma_db)) for k in K_list]
    else:
        flat = db2lin(np.asarray(gamma_db, dtype=float))
        if flat.size != sum(K_list):
            raise DimensionMismatch("per-user gamma_db must have K_tot entries")
        gamma, ofs = [], 0
        for k in K_list:
            gamma.append(flat[ofs:ofs + k].copy())
            ofs += k
    return SystemConfig(G=G, K=K_list, N=int(N), gamma=gamma,
                        sigma2=float(sigma2), P=float(P))


@dataclass
class ChannelSet:
    """Per-group channel matrices (users as columns) and large-scale variances."""

    H: list
    beta: list

    def __post_init__(self):
        if len(self.H) != len(self.beta):
            raise DimensionMismatch("H and beta must have one entry per group")
        for h, b in zip(self.H, self.beta):
            if h.shape[1] != np.atleast_1d(b).shape[0]:
                raise DimensionMismatch("beta length must match channel columns")
            if not np.isfinite(h).all():
                raise ValueError("channel entries must be finite")

    @property
    def N(self) -> int:
        return self.H[0].shape[0]

    @property
    def G(self) -> int:
        return len(self.H)

    @property
    def K(self) -> list:
        return [h.shape[1] for h in self.H]

    @property
    def K_tot(self) -> int:
        return int(sum(self.K))

    def stacked(self) -> np.ndarray:
        return np.concatenate(self.H, axis=1)

    def beta_flat(self) -> np.ndarray:
        return np.concatenate([np.atleast_1d(b) for b in self.beta])

    def group_slices(self) -> list:
        out, ofs = [], 0
        for k in self.K:
            out.append(slice(ofs, ofs + k))
            ofs += k
        return out


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def gen_normalized_channels(cfg: SystemConfig, seed: int) -> ChannelSet:
    """i.i.d. circular complex Gaussian channels with unit per-entry variance."""
    rng = _rng(seed)
    H, beta = [], []
    for k in cfg.K:
        re = rng.standard_normal((cfg.N, k))
        im = rng.standard_normal((cfg.N, k))
        H.append((re + 1j * im) / np.sqrt(2.0))
        beta.append(np.ones(k))
    return ChannelSet(H=H, beta=beta)


def gen_pathloss_channels(cfg: SystemConfig, seed: int):
    """Distance-based channels: beta = xi0 * d^-3 with users uniform in an annulus.

    xi0 is set so a user at unit distance sees beta/sigma2 at the cell-edge
    SNR; returns (ChannelSet, distances) with distances grouped like H.
    """
    rng = _rng(seed)
    xi0 = cfg.sigma2 * db2lin(EDGE_SNR_DB)
    d_lo, d_hi = ANNULUS
    H, beta, dists = [], [], []
    for k in cfg.K:
        # uniform over the annulus area => density 2d / (d_hi^2 - d_lo^2)
        u = rng.uniform(0.0, 1.0, size=k)
        d = np.sqrt(d_lo ** 2 + u * (d_hi ** 2 - d_lo ** 2))
        b = xi0 * d ** (-PATHLOSS_EXPONENT)
        re = rng.standard_normal((cfg.N, k))
        im = rng.standard_normal((cfg.N, k))
        g = (re + 1j * im) / np.sqrt(2.0)
        H.append(g * np.sqrt(b)[None, :])
        beta.append(b)
        dists.append(d)
    return ChannelSet(H=H, beta=beta), dists


CHANNEL_MODELS = ("normalized", "pathloss")


@dataclass
class Scenario:
    """A config plus the recipe (model, seed) for its channels."""

    cfg: SystemConfig
    channel_model: str = "normalized"
    seed: int = 0
    gamma_db_raw: object = field(default=None, repr=False)

    def channels(self, seed: int | None = None) -> ChannelSet:
        s = self.seed if seed is None else seed
        if self.channel_model == "normalized":
            return gen_normalized_channels(self.cfg, s)
        return gen_pathloss_channels(self.cfg, s)[0]

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        a, b = self.cfg, other.cfg
        return (
            a.G == b.G
            and a.K == b.K
            and a.N == b.N
            and all(np.array_equal(x, y) for x, y in zip(a.gamma, b.gamma))
            and a.sigma2 == b.sigma2
            and a.P == b.P
            and self.channel_model == other.channel_model
            and self.seed == other.seed
        )


def default_scenario(N=100) -> Scenario:
    return Scenario(cfg=make_config(N=N), channel_model="normalized", seed=0,
                    gamma_db_raw=10.0)


_REQUIRED_FIELDS = ("G", "K", "N", "gamma_db", "sigma2", "P", "channel_model", "seed")


def save_scenario(sc: Scenario, path: str) -> None:
    gamma_db = sc.gamma_db_raw
    if gamma_db is None:
        gamma_db = lin2db(sc.cfg.gamma_flat()).tolist()
    doc = {
        "G": sc.cfg.G,
        "K": list(sc.cfg.K),
        "N": sc.cfg.N,
        "gamma_db": gamma_db,
        "sigma2": sc.cfg.sigma2,
        "P": sc.cfg.P,
        "channel_model": sc.channel_model,
        "seed": sc.seed,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    for name in _REQUIRED_FIELDS:
        if name not in doc:
            raise ParseError(f"missing field '{name}'")
    if doc["channel_model"] not in CHANNEL_MODELS:
        raise ParseError(
            f"field 'channel_model' must be one of {CHANNEL_MODELS}, "
            f"got {doc['channel_model']!r}"
        )
    try:
        cfg = make_config(
            G=int(doc["G"]),
            K=doc["K"],
            N=int(doc["N"]),
            gamma_db=doc["gamma_db"],
            sigma2=float(doc["sigma2"]),
            P=float(doc["P"]),
        )
    except (TypeError, ValueError, DimensionMismatch) as exc:
        raise ParseError(f"bad field value: {exc}") from exc
    return Scenario(cfg=cfg, channel_model=doc["channel_model"],
                    seed=int(doc["seed"]), gamma_db_raw=doc["gamma_db"])
