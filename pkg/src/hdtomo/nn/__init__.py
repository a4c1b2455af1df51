"""Neural components: U-Net backbone, differentiable level-K backprojection, two-phase models."""

from .layers import NetConfig, UNet, ResidualNet, count_parameters
from .ops import PatchBackprojection, patch_backprojection, consistency_merge
from .dualdomain import (IINet, PINet, PatchData, TrainConfig, TrainResult, TrainingDiverged,
                         build_dataset, infer_pipeline, load_checkpoint, predict_images,
                         random_ds_list, random_phantoms, save_checkpoint, train, train_ii_net,
                         train_pi_net)
