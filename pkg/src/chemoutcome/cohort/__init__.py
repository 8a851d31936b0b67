"""Cohort assembly: failure labels, regimen features and the feature matrix."""

from .dataset import Dataset, Extraction, build_dataset
from .encoding import MISSING, NOT_ASSESSED, decode, encode
from .features import EmrRow, FeatureVector, assemble_features, data_dictionary, merge_phenotypes
from .outcomes import PlanDrug, TreatmentPlan, derive_failure, is_failure, time_to_event
from .records import SurvivalRecord
from .regimens import ApprovedDrug, RegimenCatalog, build_regimen_features, load_approved_drugs
