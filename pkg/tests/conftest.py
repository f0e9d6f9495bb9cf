import threading
from decimal import Decimal

import pytest

from miniduet.boundary import EnclaveChannel
from miniduet.enclave import Enclave, EnclaveConfig, HardwareRoot
from miniduet.gateway import Gateway, make_server
from miniduet.mech import NoiseRng
from miniduet.store import RecordLog

SCHEMA_TEXT = "M [L1, U | star, dR :: dR :: []]"

COUNTING_QUERY = """
plam . df : M [L1, U | star, dR :: dR :: []] =>
  let eps = R+[1.0] in
  let delta = R+[0.001] in
  gauss[R+[1.0], eps, delta] <df> { real (rows df) }
"""

PRIVFN_PROGRAM = "plam . x : R => gauss[R+[1.0], R+[1.0], R+[0.001]] <x> { x }"

STANDALONE_GAUSS = """
let eps = R+[1.5] in
let delta = R+[0.000001] in
gauss[R+[1.0], eps, delta] <x> { x }
"""

RAW_COUNT_QUERY = """
plam . df : M [L1, U | star, dR :: dR :: []] =>
  real (rows df)
"""


class ZeroNoise:
    """Noise source that adds nothing; isolates the deterministic part."""

    def laplace(self, b):
        return 0.0

    def gauss(self, sigma):
        return 0.0


class CountingRng:
    """Real noise, but counts how many samples were drawn."""

    def __init__(self, seed=0):
        self._inner = NoiseRng(seed)
        self.draws = 0

    def laplace(self, b):
        self.draws += 1
        return self._inner.laplace(b)

    def gauss(self, sigma):
        self.draws += 1
        return self._inner.gauss(sigma)


def make_config(eps="2.0", delta="0.002", schema=SCHEMA_TEXT,
                build_id="testbuild") -> EnclaveConfig:
    return EnclaveConfig(Decimal(eps), Decimal(delta), schema, build_id)


@pytest.fixture
def root():
    return HardwareRoot()


@pytest.fixture
def enclave(root):
    return Enclave(make_config(), root, rng_seed=7)


class LiveServer:
    def __init__(self, enclave: Enclave, root: HardwareRoot):
        self.enclave = enclave
        self.root = root
        self.store = RecordLog()
        self.channel = EnclaveChannel(enclave)
        self.gateway = Gateway(self.channel, self.store)
        self.httpd = make_server(self.gateway)
        host, port = self.httpd.server_address[:2]
        self.url = f"http://{host}:{port}"
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        daemon=True)
        self._thread.start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        self.channel.close()


@pytest.fixture
def live_server(enclave, root):
    server = LiveServer(enclave, root)
    yield server
    server.close()
