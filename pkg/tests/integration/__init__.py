# Integration tests for fplab
