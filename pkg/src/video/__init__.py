# Per-sequence video segmentation driven by a single detected prompt frame
