"""
RIFF/WAVE PCM-16 reader and mono writer.
"""

import wave
from pathlib import Path

import numpy as np

from src.exceptions import DecodeError
from src.logging_config import get_logger
from src.models.data_models import AudioClip
from .base_repository import BaseRepository, PathLike

logger = get_logger(__name__)

PCM16_SCALE = 32768.0


def _decode_error(path: PathLike, field: str, message: str) -> DecodeError:
    return DecodeError(f"{path}: {message}", {"path": str(path), "field": field})


def _check_riff_header(path: Path) -> None:
    with open(path, "rb") as f:
        head = f.read(12)
    if len(head) < 12:
        raise _decode_error(path, "riff_header", f"truncated RIFF header ({len(head)} bytes)")
    if head[0:4] != b"RIFF":
        raise _decode_error(path, "chunk_id", f"expected 'RIFF' chunk id, got {head[0:4]!r}")
    if head[8:12] != b"WAVE":
        raise _decode_error(path, "format", f"expected 'WAVE' format, got {head[8:12]!r}")


def read_wav(path: PathLike) -> AudioClip:
    """
    Decode a PCM-16 mono or stereo WAV file.

    Samples are scaled by 1/32768; stereo is downmixed by the channel mean.

    Raises:
        DecodeError: malformed RIFF or an unsupported codec, bit depth or
            channel count; ``details["field"]`` names the offending field
    """
    path = Path(path)
    try:
        _check_riff_header(path)
        with wave.open(str(path), "rb") as wav_file:
            channels = wav_file.getnchannels()
            sample_width = wav_file.getsampwidth()
            frame_rate = wav_file.getframerate()
            num_frames = wav_file.getnframes()
            raw_frames = wav_file.readframes(num_frames)
    except OSError as e:
        raise _decode_error(path, "file", str(e))
    except EOFError:
        raise _decode_error(path, "fmt_chunk", "file ends inside the header")
    except wave.Error as e:
        message = str(e)
        field = "audio_format" if "unknown format" in message else "chunks"
        raise _decode_error(path, field, message)

    if sample_width != 2:
        raise _decode_error(path, "bits_per_sample", f"only 16-bit PCM is supported, got {8 * sample_width}-bit")
    if channels not in (1, 2):
        raise _decode_error(path, "num_channels", f"only mono or stereo is supported, got {channels} channels")
    if frame_rate <= 0:
        raise _decode_error(path, "sample_rate", f"invalid sample rate {frame_rate}")
    if len(raw_frames) != num_frames * channels * 2:
        raise _decode_error(path, "data", f"data chunk holds {len(raw_frames)} bytes, header declares "
                                          f"{num_frames * channels * 2}")
    if num_frames == 0:
        raise _decode_error(path, "data", "no samples")

    samples = np.frombuffer(raw_frames, dtype="<i2").astype(np.float64) / PCM16_SCALE
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    return AudioClip(samples, frame_rate, str(path))


def write_wav(path: PathLike, samples, sample_rate: int) -> Path:
    """Write mono PCM-16; samples in [-1, 1] are scaled by 32768 and clipped to int16."""
    path = BaseRepository._prepare(path)
    pcm = np.clip(np.round(np.asarray(samples, dtype=np.float64) * PCM16_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wav_file:
        wav_file.setnchannels(1)
        wav_file.setsampwidth(2)
        wav_file.setframerate(int(sample_rate))
        wav_file.writeframes(pcm.tobytes())
    logger.debug(f"Wrote {len(pcm)} samples to {path}")
    return path

