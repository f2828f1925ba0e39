"""Two-category spectrum case study (draw, screen, analyse, joint play)."""
