# Pixel-space geometry and mask arithmetic for the polyp segmentation toolkit
