"""System configuration, ULA steering vectors and Rayleigh channel draws."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidAngleError


@dataclass(frozen=True)
class SystemConfig:
    """Antenna counts, stream layout, power and noise of one DFRC downlink.

    Parameters
    ----------
    n_tx : int
        Base-station transmit antennas.
    n_rx : int
        Receive antennas per user.
    n_users : int
        Number of users ``K``.
    streams_per_user : int
        Data streams ``d`` per user.
    power : float
        Total transmit power ``P``.
    noise_var : float
        Receiver noise variance.
    weights : tuple of float, optional
        Per-user rate weights; defaults to all ones.
    """
    n_tx: int
    n_rx: int
    n_users: int = 1
    streams_per_user: int = 1
    power: float = 1.0
    noise_var: float = 1.0
    weights: tuple = field(default=None)

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_users", "streams_per_user"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not self.power > 0:
            raise ConfigError(f"power must be > 0, got {self.power!r}")
        if not self.noise_var > 0:
            raise ConfigError(f"noise_var must be > 0, got {self.noise_var!r}")
        if self.n_rx > self.n_tx:
            raise ConfigError(f"n_rx ({self.n_rx}) must not exceed n_tx ({self.n_tx})")
        d = self.streams_per_user
        if d > min(self.n_tx, self.n_rx):
            raise ConfigError(
                f"streams_per_user ({d}) exceeds min(n_tx, n_rx) = {min(self.n_tx, self.n_rx)}")
        if self.total_streams > self.n_tx:
            raise ConfigError(
                f"total streams d*K = {self.total_streams} exceed n_tx = {self.n_tx}")
        w = self.weights
        if w is None:
            w = (1.0,) * self.n_users
        w = tuple(float(x) for x in w)
        if len(w) != self.n_users:
            raise ConfigError(f"expected {self.n_users} weights, got {len(w)}")
        if any(not x > 0 for x in w):
            raise ConfigError(f"weights must all be > 0, got {w}")
        object.__setattr__(self, "weights", w)

    @property
    def total_streams(self):
        """``D = d * K``."""
        return self.streams_per_user * self.n_users

    @property
    def n_radar(self):
        """Columns of the radar block, ``n_tx - D``."""
        return self.n_tx - self.total_streams

    @property
    def snr_db(self):
        return 10.0 * np.log10(self.power / self.noise_var)

    def with_snr_db(self, snr_db):
        """Copy with ``noise_var = P / 10^(snr/10)``."""
        from dataclasses import replace
        return replace(self, noise_var=self.power / 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class ChannelSet:
    """The ``K`` downlink channels (each ``n_rx x n_tx``) of one trial."""
    channels: tuple
    seed: int = 0

    def __post_init__(self):
        chans = tuple(np.asarray(H, dtype=complex) for H in self.channels)
        for H in chans:
            if H.ndim != 2 or not np.all(np.isfinite(H)):
                raise ConfigError("channel matrices must be finite 2-D arrays")
            H.setflags(write=False)
        object.__setattr__(self, "channels", chans)

    def __len__(self):
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)

    def __getitem__(self, k):
        return self.channels[k]

    def stacked(self):
        """Channels as one ``(K, n_rx, n_tx)`` array."""
        return np.stack(self.channels)


def rng_for(seed):
    """The package's named generator: PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def sample_channels(cfg, seed):
    """Draw i.i.d. CN(0, 1) channel entries for every user.

    Real and imaginary parts are independent N(0, 1/2). The output is a
    pure function of ``(cfg, seed)``.
    """
    rng = rng_for(seed)
    shape = (cfg.n_users, cfg.n_rx, cfg.n_tx)
    H = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return ChannelSet(channels=tuple(H), seed=int(seed))


def _check_angles(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < -90) or np.any(theta > 90):
        raise InvalidAngleError(f"angles must lie in [-90, 90] degrees, got {theta}")
    return theta


def steering_vector(n_tx, theta):
    """Half-wavelength ULA response ``exp(i pi n sin(theta))``, theta in degrees."""
    theta = float(_check_angles(theta))
    n = np.arange(n_tx)
    return np.exp(1j * np.pi * n * np.sin(np.deg2rad(theta)))


def steering_matrix(n_tx, thetas):
    """Steering vectors for several angles as columns, shape ``(n_tx, len(thetas))``."""
    thetas = np.atleast_1d(_check_angles(thetas))
    n = np.arange(n_tx)[:, None]
    return np.exp(1j * np.pi * n * np.sin(np.deg2rad(thetas))[None, :])
