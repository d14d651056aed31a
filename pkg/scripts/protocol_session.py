"""Run one dial episode over the line protocol and print the transcript.

    python3 scripts/protocol_session.py --params 0.4 0.4 0.4 0.4 --robot 2
"""

from __future__ import annotations

import argparse

from deltaz.bench.config import default_config
from deltaz.device import IDENTITY, MockFirmware, ProtocolEnv
from deltaz.dial_env import DialEnv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--params", type=float, nargs=4, default=[0.4] * 4, help="normalized rho1 theta1 rho2 theta2")
    ap.add_argument("--robot", type=int, default=0, help="shipped profile index; -1 for an ideal robot")
    args = ap.parse_args(argv)

    cfg = default_config()
    env = DialEnv(cfg.env, cfg.geometry, cfg.workspace())
    imp = IDENTITY if args.robot < 0 else cfg.robots[args.robot]
    fw = MockFirmware(env, cfg.geometry, imp)

    def transact(line: str) -> str:
        reply = fw.handle_line(line)
        print(f"> {line.strip():<28} < {reply.strip()}")
        return reply

    proto = ProtocolEnv(transact, env)
    proto.reset()
    out = proto.step(args.params)
    print(f"final angle {out.final_angle:.2f} deg (target {cfg.env.target_angle:g}), "
          f"reward {out.reward:.5f}, {'success' if out.success else 'miss'}")


if __name__ == "__main__":
    main()
