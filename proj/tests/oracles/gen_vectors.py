#!/usr/bin/env python3
#
# Copyright 2026 The minion-lab Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes reference vectors for the C++ tests.

COBS comes from a straightforward block-splitting implementation written
here, records from the `cryptography` package, chunk headers from struct.
None of it shares code with the library under test.

    python3 tests/oracles/gen_vectors.py tests/data
"""

import hashlib
import hmac
import random
import struct
import sys
from pathlib import Path

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes


def cobs_encode(data: bytes) -> bytes:
    # Split on zeros, then cut every piece into runs of at most 254 bytes.
    out = bytearray()
    pieces = data.split(b"\x00")
    for i, piece in enumerate(pieces):
        last_piece = i == len(pieces) - 1
        while len(piece) >= 254:
            out.append(255)
            out += piece[:254]
            piece = piece[254:]
            if not piece and last_piece:
                # A full run that ends the payload needs no trailing group
                # unless a zero followed it.
                return bytes(out)
        out.append(len(piece) + 1)
        out += piece
    return bytes(out)


def cobs_cases(rng: random.Random):
    fixed = [
        b"",
        b"\x00",
        b"\x00\x00",
        b"\x11\x22\x00\x33",
        b"\x11\x22\x33\x44",
        b"\x11\x00\x00\x00",
        bytes(range(1, 255)),
        bytes(range(1, 255)) + b"\x00",
        bytes(range(1, 256)),
        bytes(range(0, 256)),
        bytes([1]) * 253,
        bytes([1]) * 508,
        bytes([1]) * 509,
        bytes([1]) * 254 + b"\x00" + bytes([2]) * 254,
    ]
    for c in fixed:
        yield c
    for _ in range(300):
        n = rng.choice([rng.randrange(0, 16), rng.randrange(0, 600), rng.randrange(250, 260) * rng.randrange(1, 5)])
        density = rng.choice([0.0, 0.01, 0.1, 0.5])
        yield bytes(0 if rng.random() < density else rng.randrange(1, 256) for _ in range(n))


def seal_record(enc_key, mac_key, rn, iv, plaintext, ctype=23):
    pseudo = struct.pack(">QBBBH", rn, ctype, 3, 2, len(plaintext))
    tag = hmac.new(mac_key, pseudo + plaintext, hashlib.sha256).digest()
    block = plaintext + tag
    pad = (16 - (len(block) + 1) % 16) % 16
    block += bytes([pad]) * (pad + 1)
    enc = Cipher(algorithms.AES(enc_key), modes.CBC(iv)).encryptor()
    ct = enc.update(block) + enc.finalize()
    body = iv + ct
    return struct.pack(">BBBH", ctype, 3, 2, len(body)) + body


def chunk_header(stream_id, stream_seq, index, count, payload_len):
    flags = (1 if index == 0 else 0) | (2 if index == count - 1 else 0)
    return struct.pack(">HHHHIB3x", stream_id, stream_seq, index, count, payload_len, flags), flags


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20120611)

    with open(out / "cobs_vectors.txt", "w") as f:
        f.write("# payload_hex encoded_hex ('-' is empty)\n")
        for p in cobs_cases(rng):
            e = cobs_encode(p)
            f.write(f"{p.hex() or '-'} {e.hex()}\n")

    with open(out / "utls_vectors.txt", "w") as f:
        f.write("# enc_key mac_key record_number type iv plaintext wire ('-' is empty)\n")
        for i in range(64):
            enc_key = rng.randbytes(16)
            mac_key = rng.randbytes(32)
            rn = rng.choice([0, 1, 2, rng.randrange(0, 1 << 20), rng.randrange(0, 1 << 64)])
            ctype = rng.choice([23, 23, 23, 22, 21, 20])
            iv = rng.randbytes(16)
            n = rng.choice([0, 1, 15, 16, 17, 31, 47, 48, rng.randrange(0, 2000), 16384])
            pt = rng.randbytes(n)
            wire = seal_record(enc_key, mac_key, rn, iv, pt, ctype)
            f.write(f"{enc_key.hex()} {mac_key.hex()} {rn} {ctype} {iv.hex()} {pt.hex() or '-'} {wire.hex()}\n")

    with open(out / "chunk_vectors.txt", "w") as f:
        f.write("# stream_id stream_seq chunk_index chunk_count payload_len flags header_hex\n")
        for i in range(64):
            count = rng.choice([1, 1, 2, 3, rng.randrange(1, 65536)])
            index = rng.randrange(0, count)
            sid = rng.randrange(0, 65536)
            seq = rng.randrange(0, 65536)
            plen = rng.choice([0, 1, 1408, rng.randrange(0, 1 << 32)])
            h, flags = chunk_header(sid, seq, index, count, plen)
            f.write(f"{sid} {seq} {index} {count} {plen} {flags} {h.hex()}\n")


if __name__ == "__main__":
    main()
