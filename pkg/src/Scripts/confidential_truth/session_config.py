import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import constants as cs
import protocols
import ring_fixed as rf
import truthfind_plain as tp

LOG = logging.getLogger(__name__)

# fields both servers must agree on; the rest is local deployment detail
PUBLIC_FIELDS = ('algorithm', 'variant', 'iters', 'n', 'k', 'q', 'f', 'newton', 'truncation', 'eta', 'eps',
                 'session_id')


@dataclass
class SessionConfig:
    algorithm: str = '3est'
    variant: str = 'base'
    iters: int = cs.DEFAULT_ITERS
    n: int = 0
    k: int = 0
    q: int = cs.RING_BITS
    f: int = cs.FRAC_BITS
    newton: dict = field(default_factory=lambda: protocols.NewtonConfig().to_dict())
    truncation: str = cs.TRUNCATION_MODE
    eta: float = cs.COSINE_ETA
    eps: float = cs.SQUEEZE_EPS
    session_id: int = 0
    host: str = cs.PARTY_HOST
    port: int = cs.PARTY_PORT
    dealer_files: list = field(default_factory=list)  # [party 1 file, party 2 file]; empty = seeded dealer
    dealer_seed: Optional[int] = None
    allow_insecure_dealer: bool = False
    release_host: Optional[str] = None
    release_port: int = cs.RELEASE_PORT

    def __post_init__(self):
        # validate eagerly so a bad file fails at load, not mid-session
        self.params
        self.newton_config()
        self.algo_config()
        if self.truncation not in protocols.TRUNCATION_MODES:
            raise ValueError('Unknown truncation mode: {}'.format(self.truncation))
        if self.dealer_files and len(self.dealer_files) != 2:
            raise ValueError('dealer_files must list one file per party, got {}'.format(self.dealer_files))

    @property
    def params(self) -> rf.RingParams:
        return rf.RingParams(q=self.q, f=self.f)

    def newton_config(self) -> protocols.NewtonConfig:
        return protocols.NewtonConfig(**self.newton)

    def algo_config(self) -> tp.AlgoConfig:
        return tp.AlgoConfig.preset(self.algorithm, self.variant, self.iters, eta=self.eta, eps=self.eps)

    def public_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {name: d[name] for name in PUBLIC_FIELDS}

    def digest(self) -> int:
        """64-bit digest of the public parameters, compared during the handshake."""
        blob = json.dumps(self.public_dict(), sort_keys=True).encode('utf-8')
        return int.from_bytes(hashlib.sha256(blob).digest()[:8], 'little')

    def replace(self, **overrides):
        overrides = {key: val for key, val in overrides.items() if val is not None}
        return dataclasses.replace(self, **overrides)

    def save(self, path):
        with open(path, 'w') as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
        LOG.info('session config written to %s', path)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError('Unknown session config keys in {}: {}'.format(path, sorted(unknown)))
        return cls(**d)
