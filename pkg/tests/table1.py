"""Per-corruption novel-class scores printed in the OV-COCO-C benchmark table (15 corruptions, each
already averaged over 5 severities) and the printed overall averages."""

CORRUPTIONS = (
    "gauss", "shot", "impulse", "defocus", "glass", "motion", "zoom", "snow",
    "frost", "fog", "bright", "contrast", "elastic", "pixelate", "jpeg",
)

CELLS = {
    "pica": (17.8, 17.8, 13.8, 19.6, 12.5, 17.4, 11.0, 19.8, 22.8, 31.3, 33.6, 24.7, 25.6, 19.5, 22.6),
    "baron": (17.8, 17.3, 13.6, 18.3, 12.2, 17.0, 10.7, 17.6, 21.4, 29.2, 30.8, 23.0, 23.6, 17.3, 19.9),
    "baron_dagger": (17.7, 17.5, 14.4, 18.9, 12.1, 16.8, 10.7, 18.9, 22.3, 30.1, 31.3, 24.3, 23.7, 17.8, 20.6),
}

PRINTED_AVERAGE = {"pica": 20.7, "baron": 19.3, "baron_dagger": 19.8}
