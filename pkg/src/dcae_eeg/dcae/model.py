"""Deep convolutional autoencoder: three conv blocks, a dense bottleneck, mirrored decoder."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..errors import ConfigInvalid
from ..nn import functional as F
from ..nn.layers import BatchNorm1d, Conv1d, Dense, Dropout, Module
from ..nn.tensor import Tensor

LOSS_MODES = ("TS", "TS_FT", "TS_STFT")


@dataclass
class DcaeConfig:
    in_channels: int = 23
    in_time: int = 512
    latent_dim: int = 500
    widths: tuple = (32, 64, 128)
    kernels: tuple = (7, 5, 3)
    dropout: float = 0.2
    activation: str = "relu"
    loss_mode: str = "TS"
    ft_weight: float = 20.0
    stft_weight: float = 20.0
    band: tuple = (8.0, 30.0)
    fs: float = 256.0

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        self.kernels = tuple(int(k) for k in self.kernels)
        self.band = tuple(float(b) for b in self.band)
        self.validate()

    def validate(self):
        if len(self.widths) != 3 or len(self.kernels) != 3:
            raise ConfigInvalid("exactly three encoder blocks (widths, kernels) are required")
        if any(k % 2 == 0 or k < 1 for k in self.kernels):
            raise ConfigInvalid("kernel sizes must be odd and positive: %s" % (self.kernels,))
        if min(self.widths) < 1 or self.latent_dim < 1 or self.in_channels < 1:
            raise ConfigInvalid("widths, latent_dim and in_channels must be positive")
        if self.in_time % 4:
            raise ConfigInvalid("in_time must be divisible by 4 (two pooling stages)")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigInvalid("dropout must lie in [0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ConfigInvalid("unknown activation %r" % self.activation)
        if self.loss_mode not in LOSS_MODES:
            raise ConfigInvalid("loss_mode must be one of %s" % (LOSS_MODES,))
        if self.band[0] >= self.band[1]:
            raise ConfigInvalid("band must be increasing")

    @property
    def bottleneck_time(self):
        return self.in_time // 4

    @property
    def flat_features(self):
        return self.widths[2] * self.bottleneck_time

    def to_dict(self):
        d = asdict(self)
        d["widths"], d["kernels"], d["band"] = list(self.widths), list(self.kernels), list(self.band)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid("unknown model config keys: %s" % sorted(unknown))
        return cls(**d)


ACTIVATIONS = {
    "relu": F.relu,
    "identity": lambda x: x,
}


class DCAE(Module):
    """Encoder/decoder pair; ``forward`` returns ``(reconstruction, latent)``."""

    def __init__(self, cfg, seed=0, dtype=np.float32):
        cfg.validate()
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        c, (w1, w2, w3), (k1, k2, k3) = cfg.in_channels, cfg.widths, cfg.kernels
        self.enc_conv = [Conv1d(c, w1, k1, rng, dtype), Conv1d(w1, w2, k2, rng, dtype),
                         Conv1d(w2, w3, k3, rng, dtype)]
        self.enc_bn = [BatchNorm1d(w1, dtype=dtype), BatchNorm1d(w2, dtype=dtype),
                       BatchNorm1d(w3, dtype=dtype)]
        self.enc_drop = Dropout(cfg.dropout)
        self.to_latent = Dense(cfg.flat_features, cfg.latent_dim, rng, dtype)
        self.from_latent = Dense(cfg.latent_dim, cfg.flat_features, rng, dtype)
        self.dec_conv = [Conv1d(w3, w2, k3, rng, dtype), Conv1d(w2, w1, k2, rng, dtype),
                         Conv1d(w1, c, k1, rng, dtype)]
        self.dec_bn = [BatchNorm1d(w2, dtype=dtype), BatchNorm1d(w1, dtype=dtype)]
        self.dec_drop = [Dropout(cfg.dropout), Dropout(cfg.dropout)]
        self.act = ACTIVATIONS[cfg.activation]
        self.dtype = dtype

    def set_rng(self, rng):
        """Share one generator between all dropout layers."""
        for d in [self.enc_drop] + self.dec_drop:
            d.rng = rng

    def encode(self, x):
        act = self.act
        h = self.enc_drop(act(self.enc_bn[0](self.enc_conv[0](x))))
        h = F.maxpool1d(act(self.enc_bn[1](self.enc_conv[1](h))))
        h = F.maxpool1d(act(self.enc_bn[2](self.enc_conv[2](h))))
        return self.to_latent(F.flatten(h))

    def decode(self, z):
        act = self.act
        cfg = self.cfg
        h = self.from_latent(z).reshape(z.shape[0], cfg.widths[2], cfg.bottleneck_time)
        h = self.dec_drop[0](act(self.dec_bn[0](self.dec_conv[0](F.upsample_nn(h)))))
        h = self.dec_drop[1](act(self.dec_bn[1](self.dec_conv[1](F.upsample_nn(h)))))
        return self.dec_conv[2](h)

    def forward(self, x):
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        z = self.encode(x)
        return self.decode(z), z

    __call__ = forward

    def state_arrays(self):
        """Ordered name -> array mapping of every parameter and buffer."""
        out = {name: p.data for name, p in self.named_parameters()}
        out.update({name: b for name, b in self.named_buffers()})
        return out


class IdentityModel:
    """Stand-in whose reconstruction is the input itself (for metric plumbing tests)."""

    def __init__(self, cfg=None):
        self.cfg = cfg or DcaeConfig()
        self.training = False

    def eval(self):
        return self

    def train(self, mode=True):
        return self

    def forward(self, x):
        data = x.data if isinstance(x, Tensor) else np.asarray(x)
        return Tensor(data.copy()), Tensor(np.zeros((data.shape[0], 0)))

    __call__ = forward


def build_model(cfg, seed=0, dtype=np.float32):
    return DCAE(cfg, seed=seed, dtype=dtype)
