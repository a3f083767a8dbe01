"""Regenerate the malformed/valid MCMF and WAV fixture files in this folder.

The files are committed; this script documents exactly how each was built.
"""
import os
import struct

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
HDR = struct.Struct("<4sBBHIII")


def _put(name, data):
    with open(os.path.join(HERE, name), "wb") as fh:
        fh.write(data)


def mcmf():
    real = np.arange(2 * 3 * 2, dtype="<f4").reshape(2, 3, 2) / 16.0
    _put("valid_real.mcmf", HDR.pack(b"MCMF", 1, 0, 0, 2, 3, 2) + real.tobytes())
    cplx = np.stack([real, -real], axis=-1).astype("<f4")
    _put("valid_complex.mcmf", HDR.pack(b"MCMF", 1, 1, 0, 2, 3, 2) + cplx.tobytes())
    _put("bad_magic.mcmf", HDR.pack(b"MCMX", 1, 0, 0, 2, 3, 2) + real.tobytes())
    _put("truncated_header.mcmf", HDR.pack(b"MCMF", 1, 0, 0, 2, 3, 2)[:11])
    _put("truncated_payload.mcmf", HDR.pack(b"MCMF", 1, 0, 0, 2, 3, 2) + real.tobytes()[:-4])
    _put("trailing_bytes.mcmf", HDR.pack(b"MCMF", 1, 0, 0, 2, 3, 2) + real.tobytes() + b"\0\0\0\0")
    _put("bad_version.mcmf", HDR.pack(b"MCMF", 2, 0, 0, 2, 3, 2) + real.tobytes())
    _put("bad_dtype.mcmf", HDR.pack(b"MCMF", 1, 7, 0, 2, 3, 2) + real.tobytes())
    _put("reserved_nonzero.mcmf", HDR.pack(b"MCMF", 1, 0, 1, 2, 3, 2) + real.tobytes())
    _put("zero_dim.mcmf", HDR.pack(b"MCMF", 1, 0, 0, 2, 0, 2))
    _put("overflow_dims.mcmf", HDR.pack(b"MCMF", 1, 1, 0, 0xFFFFFFFF, 0xFFFFFFFF, 0xFFFFFFFF))


def _wav(fmt_tag, channels, rate, bits, payload, fmt_first=True, ext=False):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", 0xFFFE if ext else fmt_tag, channels, rate, rate * block,
                      block, bits)
    if ext:
        fmt += struct.pack("<HHI", 22, bits, 0) + struct.pack("<H", fmt_tag) + bytes(14)
    fmt_chunk = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    data_chunk = b"data" + struct.pack("<I", len(payload)) + payload
    body = fmt_chunk + data_chunk if fmt_first else data_chunk + fmt_chunk
    return b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body


def wav():
    pcm = np.array([[0, 16384], [-32768, 32767], [1, -1]], dtype="<i2")  # 3 frames, 2 channels
    _put("valid_pcm16.wav", _wav(1, 2, 16000, 16, pcm.tobytes()))
    flt = np.array([[0.5, -0.25], [1.0, 0.0]], dtype="<f4")
    _put("valid_float32.wav", _wav(3, 2, 8000, 32, flt.tobytes()))
    _put("valid_extensible_float32.wav", _wav(3, 2, 8000, 32, flt.tobytes(), ext=True))
    _put("not_riff.wav", b"RIFX" + bytes(40))
    full = _wav(1, 2, 16000, 16, pcm.tobytes())
    _put("truncated_data.wav", full[:-3])
    _put("odd_frame.wav", _wav(1, 2, 16000, 16, pcm.tobytes()[:-2]))
    _put("unsupported_codec.wav", _wav(1, 1, 16000, 24, bytes(9)))
    _put("alaw_codec.wav", _wav(6, 1, 8000, 8, bytes(8)))
    _put("data_before_fmt.wav", _wav(1, 2, 16000, 16, pcm.tobytes(), fmt_first=False))
    _put("missing_fmt.wav", b"RIFF" + struct.pack("<I", 4 + 8 + 4) + b"WAVE" + b"LIST"
         + struct.pack("<I", 4) + b"INFO")


if __name__ == "__main__":
    mcmf()
    wav()
