# controllers/program_controller.py
from flask import Blueprint, jsonify

from controllers.common import body, context_and_input, error_response, field, legality_for
from services.answers import Scale
from services.errors import SchemaError
from services.legality import validate
from services.program_dsl import operation_signature, parse_program, to_decoding_tokens
from services.program_executor import execute

program_bp = Blueprint("program", __name__)


# Parse and print a program
@program_bp.route("/parse", methods=["POST"])
def parse():
    try:
        p = parse_program(field(body(), "program", str))
        tokens = to_decoding_tokens(p)
        return jsonify({
            "program": str(p),
            "signature": operation_signature(p),
            "tokens": [str(t) for t in tokens],
            "token_ids": [t.id for t in tokens],
        }), 200
    except Exception as e:
        return error_response(e)


# Legality report; 422 when the program is not legal for the context
@program_bp.route("/check", methods=["POST"])
def check():
    try:
        data = body()
        ctx, li = context_and_input(data)
        report = validate(parse_program(field(data, "program", str)), li, legality_for(ctx))
        return jsonify(report.to_dict()), 200 if report.ok else 422
    except Exception as e:
        return error_response(e)


@program_bp.route("/exec", methods=["POST"])
def run():
    try:
        data = body()
        ctx, li = context_and_input(data)
        p = parse_program(field(data, "program", str))
        report = validate(p, li, legality_for(ctx))
        if not report.ok:
            return jsonify(report.to_dict()), 422
        scale = ctx.gold_scale
        if data.get("scale") is not None:
            try:
                scale = Scale.parse(data["scale"])
            except ValueError:
                raise SchemaError("$.scale", f"unknown scale {data['scale']!r}") from None
        return jsonify(execute(p, li, scale).to_dict()), 200
    except Exception as e:
        return error_response(e)
