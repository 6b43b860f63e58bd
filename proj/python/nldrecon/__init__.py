"""Reconstruct undersampled multi-coil MRI by fitting an untrained U-net."""

from ._core import (
    NldError,
    adjoint_op,
    decode_array,
    encode_array,
    espirit_maps,
    fft2c,
    forward_op,
    grappa,
    ifft2c,
    nrmse,
    psnr,
    read_array,
    reconstruct,
    rsos_image,
    sample_pattern,
    shepp_logan,
    simulate_acquisition,
    simulate_coils,
    ssim,
    write_array,
)

__all__ = [
    "NldError",
    "adjoint_op",
    "decode_array",
    "encode_array",
    "espirit_maps",
    "fft2c",
    "forward_op",
    "grappa",
    "ifft2c",
    "nrmse",
    "psnr",
    "read_array",
    "reconstruct",
    "rsos_image",
    "sample_pattern",
    "shepp_logan",
    "simulate_acquisition",
    "simulate_coils",
    "ssim",
    "write_array",
]
