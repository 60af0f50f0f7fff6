from io import BytesIO
from typing import Iterable

from reportlab.lib import colors
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from .summary import SummaryTable

ART_NOTE = "Response times are raw simulated seconds and can be read as any time unit."


def summary_pdf(tables: Iterable[SummaryTable], heading: str = "Usage-policy experiment summary") -> BytesIO:
    """Render the ARU/ART tables into a PDF document held in memory."""
    buffer = BytesIO()
    doc = SimpleDocTemplate(buffer, pagesize=letter,
                            topMargin=1*inch, bottomMargin=1*inch,
                            leftMargin=0.75*inch, rightMargin=0.75*inch)
    styles = getSampleStyleSheet()
    story = []

    heading_style = ParagraphStyle(
        'SummaryHeading',
        parent=styles['Heading1'],
        fontSize=16,
        textColor=colors.darkblue,
        alignment=1,  # Center alignment
        spaceAfter=20,
        fontName='Helvetica-Bold'
    )
    section_style = ParagraphStyle(
        'SectionHeader',
        parent=styles['Heading2'],
        fontSize=12,
        textColor=colors.darkblue,
        spaceAfter=10,
        fontName='Helvetica-Bold'
    )
    note_style = ParagraphStyle(
        'Note',
        parent=styles['Normal'],
        fontSize=8,
        textColor=colors.grey,
        fontName='Helvetica',
        leading=10
    )

    story.append(Paragraph(heading, heading_style))
    for table in tables:
        story.append(Paragraph(table.title, section_style))
        grid = Table([table.header()] + table.rows())
        grid.setStyle(TableStyle([
            ('GRID', (0, 0), (-1, -1), 1, colors.black),
            ('BACKGROUND', (0, 0), (-1, 0), colors.lightgrey),
            ('BACKGROUND', (0, 0), (0, -1), colors.lightgrey),
            ('ALIGN', (1, 1), (-1, -1), 'RIGHT'),
            ('FONTNAME', (0, 0), (-1, -1), 'Helvetica'),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, -1), 9),
            ('BOTTOMPADDING', (0, 0), (-1, -1), 6),
            ('TOPPADDING', (0, 0), (-1, -1), 6),
        ]))
        story.append(grid)
        if table.metric == "art":
            story.append(Spacer(1, 6))
            story.append(Paragraph(ART_NOTE, note_style))
        story.append(Spacer(1, 20))

    doc.build(story)
    buffer.seek(0)
    return buffer
