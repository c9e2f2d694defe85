from flask import Blueprint

bp = Blueprint('clouds', __name__, cli_group=None)

from app.clouds import commands
