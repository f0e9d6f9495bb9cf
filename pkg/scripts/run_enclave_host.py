#!/usr/bin/env python3
"""Start the trusted side alone, serving boundary frames on a unix socket.

Pair it with the untrusted gateway in a second process:

    python scripts/run_enclave_host.py --config server.cfg --socket /tmp/duet.sock
    python -m miniduet.gateway --socket /tmp/duet.sock --port 8008
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from miniduet.boundary import EnclaveHost
from miniduet.enclave import Enclave, EnclaveConfig, HardwareRoot


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", required=True)
    parser.add_argument("--socket", required=True, help="unix socket path")
    parser.add_argument("--out", default="server_out")
    args = parser.parse_args()

    config = EnclaveConfig.from_file(args.config)
    root = HardwareRoot()
    enclave = Enclave(config, root)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "root_pub.pem").write_text(root.public_pem, encoding="utf-8")
    (out / "measurement.txt").write_text(enclave.measurement + "\n",
                                         encoding="utf-8")

    host = EnclaveHost(enclave, args.socket)
    print(f"measurement: {enclave.measurement}")
    print(f"enclave host on {args.socket}", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        host.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
