from enum import StrEnum


class Distance(StrEnum):
    SQUARED_EUCLIDEAN = "squared_euclidean"
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"
