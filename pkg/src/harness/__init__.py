# Evaluation harness: run configs, image/video runs, records, reports and overlays
