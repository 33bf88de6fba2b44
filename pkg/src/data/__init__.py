# Dataset ingestion, splitting, annotation export and synthetic data
