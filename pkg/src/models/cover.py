from pydantic import BaseModel, Field, model_validator


class CoverMap(BaseModel):
    """Node cover regions of one network snapshot over a fixed dataset.

    ``entries[k][n]`` holds the indices of samples whose layer-``k`` output at
    node ``n`` exceeds ``tau`` (by magnitude on tanh layers); ``tau=None`` means each
    activation's default threshold. Layer ``k`` is the ``k``-th weight layer,
    i.e. state ``h_{k+1}``.
    """

    iteration: int = Field(ge=0)
    tau: float | None
    n_samples: int = Field(gt=0)
    layer_sizes: list[int]
    dataset_digest: str
    entries: list[list[frozenset[int]]]

    @model_validator(mode="after")
    def _check_entries(self) -> "CoverMap":
        if [len(layer) for layer in self.entries] != self.layer_sizes:
            raise ValueError("entries do not match layer_sizes")
        for layer in self.entries:
            for cover in layer:
                if cover and (min(cover) < 0 or max(cover) >= self.n_samples):
                    raise ValueError("cover references a sample outside the dataset")
        return self

    def cover(self, layer: int, node: int) -> frozenset[int]:
        return self.entries[layer][node]

    def same_frame(self, other: "CoverMap") -> bool:
        return (
            self.n_samples == other.n_samples
            and self.tau == other.tau
            and self.layer_sizes == other.layer_sizes
            and self.dataset_digest == other.dataset_digest
        )


class CoverDriftReport(BaseModel):
    # distances[k][n]: Jaccard distance of node n at layer k
    distances: list[list[float]]
    mean_drift: list[float]
    coverage_before: list[float]
    coverage_after: list[float]

    @model_validator(mode="after")
    def _check_ranges(self) -> "CoverDriftReport":
        values = [d for layer in self.distances for d in layer]
        values += self.coverage_before + self.coverage_after
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("distances and coverage fractions must lie in [0, 1]")
        return self


class CoverRow(BaseModel):
    iteration: int
    layer: int
    node: int
    cover_size: int
    jaccard_vs_prev: float | None = None
