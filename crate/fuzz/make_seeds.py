#!/usr/bin/env python3
"""Regenerates corpus/ seeds. Needs a built `peeg` (cargo build -p peeg-cli)."""

import json
import os
import struct
import subprocess
import tempfile

ROOT = os.path.dirname(os.path.abspath(__file__))
PEEG = os.environ.get("PEEG", os.path.join(ROOT, "..", "target", "debug", "peeg"))


GAINS = {"alpha": 1.0, "blink": 1.0, "chew": 1.0, "emg": 1.0, "ecg": 1.0}


def put(target, name, data):
    d = os.path.join(ROOT, "corpus", target)
    os.makedirs(d, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    with open(os.path.join(d, name), "wb") as f:
        f.write(data)


def envelope(ty, body):
    return b"PEEG" + bytes([1, ty]) + struct.pack("<I", len(body)) + body


def data_body(n, codes):
    head = struct.pack("<QQQIIHBBI", 7, 28_000_000, 25, 1, 250, 1, 1 if codes else 0, 8, n)
    head += bytes([24, 24, 12, 24, 24, 24, 24, 1])
    body = head + b"".join(struct.pack("<f", 0.5 * i - 3.0) for i in range(8 * n))
    if codes:
        body += b"".join(struct.pack("<i", 1000 * i - 8_000_000) for i in range(8 * n))
    return body


def frame(status, codes):
    out = status.to_bytes(3, "big")
    for c in codes:
        out += (c & 0xFFFFFF).to_bytes(3, "big")
    return out


def main():
    put("ads1299_frame", "zero", frame(0xC00000, [0] * 8))
    put("ads1299_frame", "rails", frame(0xC0F00F, [0x7FFFFF, -0x800000, 1, -1, 12345, -12345, 0, 42]))
    put("ads1299_frame", "bad_sync", frame(0x000000, [5] * 8))
    put("ads1299_frame", "short", frame(0xC00000, [0] * 8)[:26])

    # Address/value pairs: rate change, gains, a read-only write, an unknown address.
    put("register_writes", "defaults_dump", bytes([0x3E, 0x96, 0xC0, 0x60, 0x00] + [0x61] * 8 + [0] * 11))
    put("register_writes", "writes", bytes([0x01, 0x96, 0x05, 0x00, 0x06, 0x10, 0x00, 0x00, 0x40, 0x01, 0x01, 0x90]))

    hello_c = json.dumps({"role": "client", "client": "seed", "token": "tok"}).encode()
    server_hello = {
        "role": "server", "server": "peeg-station/0.1.0", "protocol": 1, "client_id": 3, "fs": 250,
        "channels": ["Fz", "Cz", "Pz", "Oz", "C3", "C4", "O1", "O2"], "gains": [24] * 8, "block_len": 25,
        "backend": "simulator", "state": "running", "epoch": 0, "auth_required": False,
        "authenticated": True, "default_credit": 64,
    }
    cmds = [
        {"id": 1, "op": "start"},
        {"id": 2, "op": "stop"},
        {"id": 3, "op": "rreg", "addr": 0},
        {"id": 4, "op": "wreg", "addr": 5, "value": 0x50},
        {"id": 5, "op": "annotate", "text": "eyes closed", "time_s": 1.5},
        {"id": 6, "op": "set_scenario", "scenario": "fig7"},
        {"id": 7, "op": "subscribe", "data": True, "metrics": False, "decimation": 4, "codes": True},
        {"id": 8, "op": "credit", "blocks": 16},
    ]
    msgs = {
        "hello_client": envelope(0x01, hello_c),
        "hello_server": envelope(0x01, json.dumps(server_hello).encode()),
        "data": envelope(0x02, data_body(3, False)),
        "data_codes": envelope(0x02, data_body(2, True)),
        "metrics": envelope(0x03, json.dumps({
            "seq": 4, "t_s": 4.0, "window_s": 4.0, "alpha_uv2": [12.5] * 8, "blinks": 1, "chews": 0, "dropped": 0,
        }).encode()),
        "ack": envelope(0x05, json.dumps({"id": 4, "ok": True, "value": 80, "epoch": 2}).encode()),
        "err": envelope(0x06, json.dumps({"id": 9, "code": "INVALID_REG", "text": "read-only"}).encode()),
    }
    for c in cmds:
        msgs["cmd_" + c["op"]] = envelope(0x04, json.dumps(c).encode())
    for name, m in msgs.items():
        put("stream_message", name, m)
        put("stream_decoder", name, bytes([7]) + m)
    put("stream_decoder", "sequence", bytes([5]) + b"".join(msgs.values()))
    put("stream_decoder", "bad_magic_midway", bytes([64]) + msgs["ack"] + b"XXXX" + msgs["err"])
    session_cmds = [msgs[k] for k in ("hello_client", "cmd_subscribe", "cmd_rreg", "cmd_wreg", "cmd_wreg", "cmd_credit")]
    put("stream_connection", "authenticated", bytes([1 | (9 << 1)]) + b"".join(session_cmds))
    put("stream_connection", "anonymous", bytes([0 | (64 << 1)]) + b"".join(session_cmds[1:]))
    put("stream_connection", "oversize", bytes([3]) + b"PEEG\x01\x04" + struct.pack("<I", 0x7FFF_FFFF))

    with tempfile.TemporaryDirectory() as tmp:
        scenario = {
            "scenario_version": 1, "name": "seed", "duration_s": 0.4, "fs": 250, "seed": 1,
            "channels": [{"label": l, "noise_uv_rms": 5.0, "event_gain": GAINS} for l in ["Fz", "Cz", "Pz", "Oz", "C3", "C4", "O1", "O2"]],
            "events": [
                {"kind": "blink", "start_s": 0.05, "length_s": 0.3, "amplitude_uv": 120.0},
                {"kind": "alpha_interval", "freq_hz": 10.0, "start_s": 0.0, "length_s": 0.4, "amplitude_uv": 20.0},
            ],
        }
        path = os.path.join(tmp, "seed.json")
        with open(path, "w") as f:
            json.dump(scenario, f)
        session = os.path.join(tmp, "seed.peeg")
        subprocess.run([PEEG, "simulate", "--scenario", path, "--out", session, "--block-len", "50"], check=True)
        with open(session, "rb") as f:
            raw = f.read()
        put("session_bytes", "complete", raw)
        put("session_bytes", "truncated", raw[: len(raw) - 3000])
        put("session_bytes", "header_only", raw[: 14 + struct.unpack("<I", raw[10:14])[0] + 4])
        csv = subprocess.run([PEEG, "export", "csv", session], check=True, capture_output=True).stdout
        put("session_csv", "export", csv)
        put("session_csv", "ragged", b"t_s,Fz_uV\n0.0,1.5\n0.004\n")
        put("scenario_json", "small", json.dumps(scenario))
        put("scenario_json", "shortcut", '"fig6"')
        put("scenario_json", "ecg", json.dumps({**scenario, "events": [
            {"kind": "ecg_run", "bpm": 60.0, "start_s": 0.0, "length_s": 0.4, "amplitude_uv": 1000.0}]}))

    put("hardware_toml", "full", 'spi_path = "/dev/spidev0.0"\nspi_speed_hz = 2000000\ndrdy_pin = 26\n'
        'reset_pin = 18\ngpio_root = "/sys/class/gpio"\ndrdy_timeout_ms = 1000\n')
    put("hardware_toml", "minimal", 'spi_path = "/dev/spidev0.0"\ndrdy_pin = 26\n')
    put("hardware_toml", "bad_speed", 'spi_path = "/dev/spidev0.0"\ndrdy_pin = 26\nspi_speed_hz = 0\n')

    put("detector_config", "empty", "{}")
    put("detector_config", "partial", json.dumps({"alpha": {"band_hz": [8.0, 12.0]}, "blink": {"mad_factor": 6.0}}))

    for name, text in [("hex", "0x50"), ("bin", "0b0101_0000"), ("dec", "255"), ("name", "CH1SET"), ("over", "0x1FF")]:
        put("cli_values", name, text)


if __name__ == "__main__":
    main()
