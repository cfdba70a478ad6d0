"""Chest X-ray severity classification: preprocessing, SMOTE, SVM / random forest, metrics."""

__version__ = "0.1.0"
