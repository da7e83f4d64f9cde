#!/usr/bin/env python3
"""
coassign - collaborative hybrid label assignment engine

  assign    - run the K auxiliary heads (ATSS, FCOS, RetinaNet, Faster-RCNN)
              and report positives, negatives and positive boxes per image
  match     - one-to-one Hungarian matching of query predictions to gts
  targets   - K+1 query-group layout, positive-query seeds (boxes, index
              pairs, positional encodings) and loss-ready target bundles
  diagnose  - IoF-IoB curves of discriminability maps, matching instability

Usage:
    python main.py assign --input scenes.json --output out/
    python main.py targets --config run.json --threads 4
    CODETR_LOG=debug python main.py diagnose --input scenes.json --output out/
"""
from coassign.cli import main

if __name__ == "__main__":
    main()
