"""Multispectral super-resolution toolkit.

Thin Python surface over the C++ core: raster containers, the degradation
model used to synthesize training pairs, the residual CNN (forward, training
with Nadam, checkpoints), tiled full-scene inference and the RMSE/SRE/SAM/UIQ
quality metrics.
"""

from s2sr._core import (  # noqa: F401
    BandImage,
    Error,
    MultiResScene,
    NetworkConfig,
    NetworkWeights,
    PatchSet,
    TrainConfig,
    area_downsample,
    bicubic_upsample,
    bilinear_upsample,
    crop_to,
    evaluate,
    pad_to_multiple,
    forward,
    gaussian_blur,
    init_he_uniform,
    load_patches,
    load_weights,
    mtf_to_sigma,
    param_count,
    read_band,
    read_band_list,
    read_scene,
    rmse,
    sam,
    sample_patches,
    save_patches,
    save_weights,
    simulate_scene,
    split_train_val,
    sre,
    superresolve,
    superresolve_all,
    train,
    uiq,
    write_band,
    write_band_list,
    write_scene,
    zero_weights,
)

__version__ = "0.1.0"
