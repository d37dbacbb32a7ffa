"""Published IVIF benchmark results (16 methods x 7 metrics, two datasets),
used to exercise the average-rank arithmetic against known rank outcomes.

Column order: en, sf, ag, vif, mi, qabf, scd (all higher-is-better).
"""

METRICS = ["en", "sf", "ag", "vif", "mi", "qabf", "scd"]

MSRS_METHODS = [
    "ReCoNet", "DeFusion", "U2Fusion", "TarDAL", "IRFS", "AdaFuse", "DATFuse",
    "LRRNet", "DDFM", "FusionMamba", "SFCFusion", "MMDRFuse", "UMF-CMGR",
    "FISCNet", "RPFNet", "ISFM",
]

MSRS_VALUES = [
    [4.23, 9.98, 2.99, 0.49, 1.58, 0.40, 1.26],
    [6.35, 7.98, 2.60, 0.75, 2.16, 0.51, 1.29],
    [5.03, 7.22, 2.25, 0.49, 1.37, 0.34, 1.06],
    [5.32, 5.54, 1.71, 0.41, 1.52, 0.17, 0.79],
    [6.17, 8.34, 2.66, 0.74, 1.82, 0.53, 1.47],
    [6.31, 5.19, 1.93, 0.52, 1.22, 0.23, 1.36],
    [6.48, 10.93, 3.56, 0.91, 2.70, 0.64, 1.41],
    [6.19, 8.47, 2.64, 0.54, 2.03, 0.45, 0.79],
    [6.13, 8.86, 2.95, 0.63, 1.65, 0.42, 1.42],
    [6.57, 11.40, 3.60, 0.95, 2.51, 0.63, 1.71],
    [5.51, 5.11, 1.72, 0.59, 1.40, 0.23, 1.12],
    [6.47, 9.69, 3.22, 0.84, 2.49, 0.58, 1.53],
    [5.60, 8.15, 2.16, 0.43, 1.34, 0.27, 0.97],
    [6.67, 11.36, 3.69, 0.92, 2.44, 0.65, 1.55],
    [7.26, 11.39, 3.75, 0.83, 1.75, 0.59, 1.61],
    [6.70, 11.42, 3.77, 1.01, 2.78, 0.68, 1.79],
]

FMB_METHODS = list(MSRS_METHODS)

FMB_VALUES = [
    [6.69, 10.70, 3.62, 0.65, 2.25, 0.55, 1.60],
    [6.39, 7.13, 2.22, 0.59, 2.29, 0.37, 1.33],
    [6.57, 10.27, 3.40, 0.66, 2.10, 0.58, 1.49],
    [6.62, 6.91, 2.16, 0.56, 2.50, 0.29, 1.03],
    [6.64, 9.88, 2.96, 0.70, 2.18, 0.59, 1.63],
    [6.73, 4.98, 1.95, 0.39, 1.40, 0.16, 1.32],
    [6.32, 10.85, 3.26, 0.71, 2.93, 0.57, 1.23],
    [6.28, 10.18, 3.08, 0.60, 2.08, 0.55, 1.27],
    [6.35, 10.23, 3.07, 0.72, 2.40, 0.58, 1.39],
    [6.84, 7.32, 2.50, 0.47, 2.21, 0.27, 1.50],
    [6.40, 7.08, 2.21, 0.62, 2.23, 0.37, 1.36],
    [6.63, 8.30, 2.63, 0.51, 2.91, 0.13, 1.05],
    [6.55, 8.84, 2.44, 0.63, 2.22, 0.41, 1.47],
    [6.72, 13.61, 3.97, 0.77, 2.94, 0.64, 1.34],
    [7.38, 13.63, 4.06, 0.74, 2.03, 0.55, 1.63],
    [6.76, 13.65, 4.10, 0.80, 2.61, 0.66, 1.68],
]
