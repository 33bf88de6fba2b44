# Configuration and shared helpers for the polyp segmentation toolkit
