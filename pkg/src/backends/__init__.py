# Detector and segmenter backends: oracle/mock models and the external adapter protocol
