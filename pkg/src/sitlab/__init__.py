"""Online lifelong learning lab for symmetric vs asymmetric image-text tuning."""

from .datagen import ClassSpec, Dataset, export_dataset, generate_dataset, load_dataset, make_descriptors
from .metrics import a_auc, a_avg, a_last, new_class_bias
from .model import (ModelConfig, ModelParams, encode_class, encode_image, init_model,
                    load_checkpoint, predict, save_checkpoint)
from .numerics import finite_diff_grad, l2_normalize, make_rng, softmax
from .objective import GradientLedger, LossOutput, ait_loss, infonce, record_ledger, sit_loss
from .streams import (StreamBatch, StreamSchedule, export_schedule, iter_batches, make_cil_schedule,
                      make_i_blurry_schedule, make_schedule, make_si_blurry_schedule, task_end_steps)
from .trainer import (RunArtifacts, SeenClassRegistry, TrainConfig, adam_step, evaluate, sgd_step,
                      train_online, zero_shot_eval)

__version__ = "0.1.0"
