"""
Exact-arithmetic symbolic kernel.

Thin layer over sympy that fixes the vocabulary of the toolkit: which names
are chart variables, which are parameters, how expressions are normalized,
differentiated, evaluated and split into polynomial coefficients. Every other
module builds its formulas through the symbols handed out here.

Author: Analysis Team
Date: October 2026
"""

from fractions import Fraction

import sympy
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    rationalize,
    standard_transformations,
)
from sympy.simplify.fu import TR8

from errors import (
    DomainError,
    InexactValueError,
    NonPolynomialError,
    SingularPointError,
    UnboundSymbolError,
    UnknownSymbolError,
)


# Chart variables plus the Cartesian phase-space momenta.
VARIABLES = ('x1', 'x2', 'r', 'th', 'xi', 'eta', 'u', 'v', 'p1', 'p2')

COEFFICIENT_NAMES = (
    'A300', 'A210', 'A201', 'A120', 'A111',
    'A102', 'A030', 'A021', 'A012', 'A003',
)

PARAMETERS = ('hbar', 'sigma', 'a', 'ap', 'a1', 'a2', 'kappa', 'lam') + COEFFICIENT_NAMES

_SYMBOLS = {name: sympy.Symbol(name, real=True) for name in VARIABLES + PARAMETERS}

_TRANSFORMATIONS = standard_transformations + (convert_xor, rationalize)

_PARSE_GLOBALS = {
    'Integer': sympy.Integer,
    'Float': sympy.Float,
    'Rational': sympy.Rational,
    'Symbol': sympy.Symbol,
    'sin': sympy.sin,
    'cos': sympy.cos,
    'sqrt': sympy.sqrt,
    'pi': sympy.pi,
}


def symbol(name):
    """
    Look up a declared variable or parameter.

    Args:
        name (str | sympy.Symbol): Declared name

    Returns:
        sympy.Symbol: The shared real symbol for that name
    """
    if isinstance(name, sympy.Symbol):
        name = name.name
    try:
        return _SYMBOLS[name]
    except KeyError:
        raise UnknownSymbolError(name) from None


def symbols(*names):
    """Tuple of declared symbols, in the order given."""
    return tuple(symbol(n) for n in names)


def is_variable(name):
    return getattr(name, 'name', name) in VARIABLES


def component_function(name, variable):
    """Undefined one-variable function, e.g. W1(xi), used for separable components."""
    return sympy.Function(name)(symbol(variable))


def as_rational(value):
    """
    Convert an exact input into a sympy Rational.

    Accepts ints, Fractions, sympy rationals and strings such as "3/2" or "-1".
    Floats are refused because they are not exact data.

    Raises:
        InexactValueError: value is not an exact rational
    """
    if isinstance(value, bool):
        raise InexactValueError(f"Boolean is not a rational value: {value}")
    if isinstance(value, sympy.Basic):
        if value.is_Rational:
            return value
        raise InexactValueError(f"Not a rational value: {value}")
    if isinstance(value, int):
        return sympy.Integer(value)
    if isinstance(value, Fraction):
        return sympy.Rational(value.numerator, value.denominator)
    if isinstance(value, str):
        try:
            return as_rational(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise InexactValueError(f"Not a rational string: '{value}'") from None
    raise InexactValueError(f"Not an exact rational: {value!r}")


def coordinate(value):
    """
    A point coordinate as a sympy number.

    Strings are read as exact rationals ("3/4", "-2", "0.5"); numbers and
    sympy expressions pass through sympify.

    Raises:
        InexactValueError: string that is not a rational
    """
    if isinstance(value, str):
        return as_rational(value)
    return sympy.sympify(value)


def rational_text(value):
    """Serialize a rational as "p/q" (or "p" for integers)."""
    value = as_rational(value)
    if value.q == 1:
        return str(value.p)
    return f"{value.p}/{value.q}"


def parse(text):
    """
    Parse infix text (``^`` for powers) into an expression.

    Decimal literals are converted to exact rationals.

    Raises:
        UnknownSymbolError: the text uses an undeclared name
    """
    expr = parse_expr(
        text,
        local_dict=dict(_SYMBOLS),
        global_dict=dict(_PARSE_GLOBALS),
        transformations=_TRANSFORMATIONS,
    )
    expr = sympy.sympify(expr)
    for free in expr.free_symbols:
        if free.name not in _SYMBOLS or free != _SYMBOLS[free.name]:
            raise UnknownSymbolError(free.name)
    return expr


def to_text(expr):
    """Print an expression in the text format accepted by parse()."""
    return sympy.sstr(sympy.sympify(expr)).replace('**', '^')


def normalize(expr):
    """
    Bring an expression to its normal form.

    Polynomial parts are expanded with like terms collected; trigonometric
    parts are rewritten into the linear {sin k*th, cos k*th} basis.
    """
    expr = sympy.sympify(expr)
    if expr.has(sympy.sin, sympy.cos):
        expr = TR8(sympy.expand(expr))
    return sympy.expand(expr)


def diff(expr, variable, order=1):
    """
    n-th partial derivative with respect to a declared variable, normalized.

    Raises:
        UnknownSymbolError: variable is not one of VARIABLES
    """
    name = getattr(variable, 'name', variable)
    if name not in VARIABLES:
        raise UnknownSymbolError(name)
    if order < 1:
        raise ValueError(f"Derivative order must be >= 1, got {order}")
    return normalize(sympy.diff(sympy.sympify(expr), symbol(name), order))


def _bind(expr, binding):
    free = expr.free_symbols
    missing = {s.name for s in free} - set(binding)
    if missing:
        raise UnboundSymbolError(missing)
    return free


def evaluate(expr, binding, mode='exact'):
    """
    Evaluate an expression at a binding.

    Args:
        expr: Expression to evaluate
        binding (dict): Map from symbol names to values
        mode (str): 'exact' (rational in, rational out) or 'float'

    Returns:
        sympy.Rational | float: Value of the expression

    Raises:
        UnboundSymbolError: a free symbol has no value
        InexactValueError: exact mode met a non-rational input or result
        SingularPointError: the expression is singular at the binding
        DomainError: float mode produced a complex value
    """
    expr = sympy.sympify(expr)
    free = _bind(expr, binding)

    if mode == 'exact':
        subs = {s: as_rational(binding[s.name]) for s in free}
        value = expr.subs(subs)
        if value.has(sympy.zoo, sympy.nan) or value in (sympy.zoo, sympy.nan):
            raise SingularPointError(f"{to_text(expr)} is singular at {binding}")
        if not value.is_Rational:
            raise InexactValueError(f"Exact evaluation produced {value}")
        return value

    if mode == 'float':
        subs = {s: sympy.Float(float(binding[s.name]), 30) if not isinstance(binding[s.name], str)
                else as_rational(binding[s.name]) for s in free}
        value = expr.evalf(30, subs=subs)
        if value.has(sympy.zoo, sympy.nan) or value in (sympy.zoo, sympy.nan):
            raise SingularPointError(f"{to_text(expr)} is singular at {binding}")
        z = complex(value)
        if abs(z.imag) > 1e-12 * max(1.0, abs(z.real)):
            raise DomainError(f"{to_text(expr)} is not real at {binding}")
        return z.real

    raise ValueError(f"Unknown evaluation mode '{mode}'")


def is_polynomial(expr, variables):
    return sympy.sympify(expr).is_polynomial(*symbols(*variables))


def poly_coeffs(expr, variables):
    """
    Split a polynomial into monomial coefficients.

    Args:
        expr: Expression polynomial in `variables` (parameters allowed in coefficients)
        variables (iterable): Variable names

    Returns:
        dict: exponent tuple -> coefficient expression (zero terms omitted)

    Raises:
        NonPolynomialError: expr is not polynomial in the variables
    """
    gens = symbols(*variables)
    expr = normalize(expr)
    if expr == 0:
        return {}
    try:
        poly = sympy.Poly(expr, *gens)
    except sympy.PolynomialError as exc:
        raise NonPolynomialError(f"{to_text(expr)} is not polynomial in {variables}: {exc}") from None
    return {monom: coeff for monom, coeff in zip(poly.monoms(), poly.coeffs()) if coeff != 0}


def reconstruct(coeffs, variables):
    """Inverse of poly_coeffs."""
    gens = symbols(*variables)
    terms = []
    for monom, coeff in coeffs.items():
        terms.append(coeff * sympy.Mul(*[g ** k for g, k in zip(gens, monom)]))
    return normalize(sympy.Add(*terms))


def lambdify(expr, names):
    """Compile an expression into a numpy callable of the named symbols."""
    return sympy.lambdify(symbols(*names), expr, modules='numpy', cse=True)
