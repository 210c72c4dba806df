from . import (
    add_dataset,
    add_project,
    calibrate,
    ls_datasets,
    ls_parameters,
    predict,
    simulate,
    validate,
)
