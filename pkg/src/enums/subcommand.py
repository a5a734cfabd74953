from enum import StrEnum


class Subcommand(StrEnum):
    FIXEDPOINT = "fixedpoint"
    COVERS = "covers"
    BOUNDARY = "boundary"
    STOCHASTIC = "stochastic"
    PLASTICITY = "plasticity"
    DATAGEN = "datagen"
    FEDERATION = "federation"
    SUITE = "suite"
