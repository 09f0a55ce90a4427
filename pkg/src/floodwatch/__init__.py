"""floodwatch: DDoS-flooding detection for wireless sensor networks.

End-to-end deterministic pipeline: synthesize client/server traffic traces
with benign periodic motes and malicious flooding motes, extract per-event
timing features, window them into tensors, train a from-scratch 1D CNN, and
score each mote as benign or malicious.
"""

__version__ = "0.1.0"

MODEL_FORMAT = "HIOT1"
