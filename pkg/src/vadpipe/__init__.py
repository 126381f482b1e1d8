"""Two-stage video anomaly detection pipeline.

Stage 1 trains a shared encoder on several self-supervised tasks and flags
frames whose weighted task losses are abnormally high. Stage 2 captions the
flagged frames, refines the captions by embedding alignment, induces
per-video behaviour rules with a language model, and asks the same model for
a rule-grounded verdict per frame. Verdicts are smoothed into frame-level
scores and evaluated against ground truth.
"""

__version__ = "0.1.0"
