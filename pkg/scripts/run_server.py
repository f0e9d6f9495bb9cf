#!/usr/bin/env python3
"""Start a single-process server: enclave + in-process boundary + gateway.

Writes the root public key and the enclave measurement to --out so data
owners can build their policy files, then serves HTTP until interrupted.

    python scripts/run_server.py --config config/server.cfg --port 8008
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from miniduet.boundary import EnclaveChannel
from miniduet.enclave import Enclave, EnclaveConfig, HardwareRoot
from miniduet.gateway import Gateway, make_server
from miniduet.store import RecordLog


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", required=True, help="key=value config file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8008)
    parser.add_argument("--out", default="server_out",
                        help="directory for root key / measurement artifacts")
    parser.add_argument("--persist", default=None,
                        help="optional append-only ciphertext log file")
    args = parser.parse_args()

    config = EnclaveConfig.from_file(args.config)
    root = HardwareRoot()
    enclave = Enclave(config, root)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "root_pub.pem").write_text(root.public_pem, encoding="utf-8")
    (out / "measurement.txt").write_text(enclave.measurement + "\n",
                                         encoding="utf-8")

    channel = EnclaveChannel(enclave)
    store = RecordLog(args.persist)
    server = make_server(Gateway(channel, store), args.host, args.port)
    host, port = server.server_address[:2]
    print(f"measurement: {enclave.measurement}")
    print(f"root public key: {out / 'root_pub.pem'}")
    print(f"serving on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("shutting down; the enclave key is destroyed with the process")
        channel.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
