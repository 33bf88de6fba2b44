# Evaluation measures and dataset aggregation
