"""
tests/integration/
~~~~~~~~~~~~~~~~~~
Desk-scale training experiments.

These tests are SKIPPED by default. To run them:

    INTEGRATION_TESTS=1 pytest tests/integration/ -v

Budget: roughly 15 minutes for interpolation and 10 for classification on a
laptop CPU.  Pass ``-x`` to stop at the first failing experiment.
"""
