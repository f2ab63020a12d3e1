"""Writers for result documents and study tables: JSON, CSV, XLSX and PDF."""
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
from openpyxl import Workbook
from openpyxl.styles import Font, PatternFill
from reportlab.lib import colors
from reportlab.lib.pagesizes import A4, landscape
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from . import __version__
from .dataset import ORTHONORMAL_TOL, file_digest
from .exceptions import FormatError
from .se3_core import Pose, is_rotation

logger = logging.getLogger(__name__)

PDF_ROW_LIMIT = 60


def provenance(command, inputs=None, parameters=None):
    """Block embedded in every JSON output; ``inputs`` maps names to SHA-256 digests."""
    return {
        'tool': 'handeye-calibration',
        'version': __version__,
        'command': command,
        'inputs': dict(inputs or {}),
        'parameters': dict(parameters or {}),
    }


def input_digests(**paths):
    return {name: file_digest(path) for name, path in paths.items() if path}


def _default(obj):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Pose):
        return {'R': obj.r.tolist(), 't': obj.t.tolist()}
    if hasattr(obj, 'as_dict'):
        return obj.as_dict()
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f'{type(obj).__name__} is not JSON serialisable')


def dumps(document):
    return json.dumps(document, indent=2, default=_default)


def _open_text(path, stream):
    if path in (None, '-'):
        return stream or sys.stdout, False
    return Path(path).open('w', newline=''), True


def write_json(document, path=None, stream=None):
    fh, owned = _open_text(path, stream)
    try:
        fh.write(dumps(document))
        fh.write('\n')
    finally:
        if owned:
            fh.close()


def columns(rows):
    seen = {}
    for row in rows:
        for key in row:
            seen.setdefault(key, None)
    return list(seen)


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, default=_default)
    return '' if value is None else value


def write_csv(rows, path=None, stream=None):
    rows = list(rows)
    header = columns(rows)
    fh, owned = _open_text(path, stream)
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row.get(key)) for key in header])
    finally:
        if owned:
            fh.close()


def write_xlsx(tables, path, prov=None):
    """One sheet per table, plus a provenance sheet."""
    wb = Workbook()
    wb.remove(wb.active)
    header_font = Font(bold=True, color='FFFFFF')
    header_fill = PatternFill('solid', fgColor='808080')
    for name, rows in tables.items():
        ws = wb.create_sheet(title=str(name)[:31])
        rows = list(rows)
        header = columns(rows)
        ws.append(header)
        for cell in ws[1]:
            cell.font = header_font
            cell.fill = header_fill
        for row in rows:
            ws.append([_sheet_value(row.get(key)) for key in header])
        ws.freeze_panes = 'A2'
    if prov:
        ws = wb.create_sheet(title='provenance')
        for key, value in _flatten(prov):
            ws.append([key, _sheet_value(value)])
    wb.save(path)
    logger.info('wrote workbook %s', path)


def _sheet_value(value):
    if isinstance(value, (dict, list, tuple)):
        return json.dumps(value, default=_default)
    if isinstance(value, np.generic):
        return value.item()
    return value


def _flatten(mapping, prefix=''):
    for key, value in mapping.items():
        name = f'{prefix}{key}'
        if isinstance(value, dict) and value:
            yield from _flatten(value, f'{name}.')
        else:
            yield name, value


def _format(value):
    if isinstance(value, float):
        return f'{value:.6g}'
    if isinstance(value, (dict, list)):
        return '...'
    return '' if value is None else str(value)


def write_pdf(title, tables, path, prov=None):
    """Summary document: one styled table per entry of ``tables``."""
    doc = SimpleDocTemplate(str(path), pagesize=landscape(A4))
    styles = getSampleStyleSheet()
    title_style = ParagraphStyle(
        'ReportTitle',
        parent=styles['Heading1'],
        fontSize=18,
        spaceAfter=20,
        textColor=colors.darkblue,
    )
    content = [Paragraph(title, title_style)]
    if prov:
        lines = [f'{key}: {value}' for key, value in _flatten(prov)]
        content.append(Paragraph('<br/>'.join(lines), styles['Normal']))
        content.append(Spacer(1, 20))

    for name, rows in tables.items():
        rows = list(rows)
        content.append(Paragraph(str(name), styles['Heading2']))
        content.append(Spacer(1, 8))
        if not rows:
            content.append(Paragraph('No rows.', styles['Italic']))
            continue
        header = columns(rows)
        data = [header] + [[_format(row.get(key)) for key in header]
                           for row in rows[:PDF_ROW_LIMIT]]
        table = Table(data, repeatRows=1)
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), colors.grey),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
            ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, 0), 7),
            ('BOTTOMPADDING', (0, 0), (-1, 0), 6),
            ('BACKGROUND', (0, 1), (-1, -1), colors.beige),
            ('FONTSIZE', (0, 1), (-1, -1), 6),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.black),
        ]))
        content.append(table)
        if len(rows) > PDF_ROW_LIMIT:
            content.append(Spacer(1, 6))
            content.append(Paragraph(
                f'Only the first {PDF_ROW_LIMIT} of {len(rows)} rows shown.', styles['Italic']))
        content.append(Spacer(1, 16))
    doc.build(content)
    logger.info('wrote PDF summary %s', path)


def write_tables(tables, title, prov, xlsx=None, pdf=None):
    if xlsx:
        write_xlsx(tables, xlsx, prov)
    if pdf:
        write_pdf(title, tables, pdf, prov)


def read_xy(path):
    """(X, Y) from a truth or estimate JSON document."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f'{path.name}: invalid JSON at line {exc.lineno}: {exc.msg}')
    poses = []
    for key in ('X', 'Y'):
        try:
            r = np.array(doc[key]['R'], dtype=float)
            t = np.array(doc[key]['t'], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f'{path.name}: cannot read {key} ({exc})')
        if r.shape != (3, 3) or t.shape != (3,) or not is_rotation(r, ORTHONORMAL_TOL):
            raise FormatError(f'{path.name}: {key} is not a rigid transform')
        poses.append(Pose(r, t))
    return tuple(poses)
