"""Fitting, feasibility, selection and inference for multinomial link models."""
