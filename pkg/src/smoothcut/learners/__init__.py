"""Online learners sharing the ``predict_one`` / ``update`` contract."""
from .bandits import IGWBandit, igw_probabilities
from .base import (
    InvalidDistribution,
    NonRealizable,
    OnlineLearner,
    MapDeclarationError,
    UpdateReport,
    sign,
)
from .baselines import NaiveThresholdClassifier, Perceptron
from .john import (
    AffineLiftClassifier,
    CoordinateFeatureClassifier,
    JohnLinearClassifier,
    MonomialFeatures,
    PolynomialMetaPointClassifier,
    affine_lift,
    probe_coordinate_map,
)
from .multiclass import KClassClassifier
from .piecewise import PiecewiseRegressor

__all__ = [
    "AffineLiftClassifier",
    "CoordinateFeatureClassifier",
    "IGWBandit",
    "InvalidDistribution",
    "JohnLinearClassifier",
    "KClassClassifier",
    "MonomialFeatures",
    "NaiveThresholdClassifier",
    "NonRealizable",
    "OnlineLearner",
    "Perceptron",
    "PiecewiseRegressor",
    "PolynomialMetaPointClassifier",
    "MapDeclarationError",
    "UpdateReport",
    "affine_lift",
    "igw_probabilities",
    "probe_coordinate_map",
    "sign",
]
