from flask import Blueprint

bp = Blueprint('analysis', __name__, cli_group=None)

from app.analysis import commands
