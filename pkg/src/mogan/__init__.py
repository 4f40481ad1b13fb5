"""Adversarial minority oversampling for machine-condition fault detection.

A K+1-way discriminator doubles as condition classifier and fault detector;
a class-conditioned generator trained with feature matching synthesizes
minority fault samples. Classical oversamplers (random, SMOTE variants,
ADASYN), an imbalance-aware metrics harness, a synthetic vibration data
pipeline, and a CLI experiment runner round out the toolkit.
"""

__version__ = "0.1.0"

from .dataio import (FaultClassSpec, ImbalanceSpec, LabeledDataset,
                     Standardizer, default_fault_specs, load_csv,
                     make_imbalanced_dataset, stratified_split, synth_signal,
                     synthesize_dataset, write_csv)
from .metrics import (MetricsReport, auc, confusion, evaluate, fam,
                      g_mean_from_labels, imbalance_metrics, mcc, roc_auc)
from .model import (DiscriminatorNet, FaultDetector, GaussianEmbeddingModel,
                    GeneratorNet, LatentStats, MixtureConfig, TrainConfig,
                    TrainHistory, TrainingDiverged, calibrate_threshold,
                    classify, classify_batch, discriminate, fake_rejection_rate,
                    fault_score, fault_scores, feature_matching_loss,
                    fit_latent_stats,
                    generate, low_density_penalty, mixture_minority_batch,
                    sample_latent, train, train_classifier)
from .resample import (NeighborIndex, adasyn, adasyn_weights, apply_plan,
                       balance_plan, borderline_smote, knn, knn_indices,
                       random_oversample, smote)
from .checkpoint import load_checkpoint, save_checkpoint
from .seeding import derive_seed, make_rng

__all__ = [name for name in dir() if not name.startswith("_")]
