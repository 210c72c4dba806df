import logging

import click


@click.group()
@click.option("--verbose", "-v", count=True, help="More log output (repeatable).")
@click.option("--quiet", "-q", is_flag=True, default=False, help="Only log errors.")
def root(verbose: int, quiet: bool):
    if quiet:
        level = logging.ERROR
    else:
        level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        force=True,
    )


@root.group()
def ls():
    pass


@root.group()
def add():
    pass
