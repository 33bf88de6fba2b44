# Detections to box prompts: filtering, suppression, the per-frame cap and the empty policy
