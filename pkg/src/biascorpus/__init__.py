"""Toolkit for tracking gendered trait associations in a corpus over time.

Pipeline: ingest and bucket a JSONL corpus (corpus), train one CBOW
embedding per bucket (embedding), score trait words by their cosine gap
between the male and female group vectors (bias), stress the result with
genre resampling (resampling), fit time trends with a word-level random
intercept (trends), correlate against human ratings and opinion series
(validation), count gendered objects of aggressive verbs in parsed text
(aggression), and infer artist gender from name frequencies
(artistgender). The cli module chains the stages.
"""

__version__ = "0.1.0"
