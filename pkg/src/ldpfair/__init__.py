"""Local differential privacy for categorical training data, with fairness and utility evaluation."""

from .budget import AllocationScheme, PrivacyAllocation, allocate, allocate_kbased, allocate_uniform
from .fairness import (
    FairnessReport,
    disparate_impact,
    equal_opportunity_difference,
    fairness_report,
    overall_accuracy_difference,
    statistical_parity_difference,
)
from .mechanisms import MechanismKind, channel_matrix, make_mechanism, optimize_theta
from .pipeline import EncodedMatrix, encode_plain, encode_report, sanitize_training
from .schema import CategoricalDomain, Dataset, DatasetSchema, group_indicator, load_csv, train_test_split

__version__ = "0.1.0"
