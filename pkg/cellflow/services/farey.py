"""
Перебор несократимых дробей (ряды Фарея, дерево Штерна-Броко)
"""
import math
from fractions import Fraction
from typing import List, Tuple


def closest_fraction(v: float, lim: int) -> Tuple[int, int]:
    """
    Ближайшая к v дробь со знаменателем не больше lim, спуском по медиантам.
    Возвращает (числитель, знаменатель).
    """
    if v < 0:
        n, d = closest_fraction(-v, lim)
        return -n, d
    whole = math.floor(v)
    v -= whole
    lower, upper = (0, 1), (1, 1)
    while True:
        mediant = (lower[0] + upper[0], lower[1] + upper[1])
        if mediant[1] > lim:
            break
        if v * mediant[1] > mediant[0]:
            lower = mediant
        elif v * mediant[1] == mediant[0]:
            return mediant[0] + whole * mediant[1], mediant[1]
        else:
            upper = mediant
    best = lower if v - lower[0] / lower[1] <= upper[0] / upper[1] - v else upper
    return best[0] + whole * best[1], best[1]


def stern_brocot_between(left: Fraction, right: Fraction, q_max: int,
                         lo: float = -math.inf, hi: float = math.inf) -> List[Fraction]:
    """
    Медианты дерева Штерна-Броко строго между соседями left < right с q <= q_max,
    попадающие в [lo, hi]. Ветви вне [lo, hi] не обходятся.
    """
    out = []
    stack = [(left, right)]
    while stack:
        a, b = stack.pop()
        if b < lo or a > hi:
            continue
        m = Fraction(a.numerator + b.numerator, a.denominator + b.denominator)
        if m.denominator > q_max:
            continue
        if lo <= m <= hi:
            out.append(m)
        stack.append((a, m))
        stack.append((m, b))
    return sorted(out)


def farey_fractions(q_max: int, lo: float, hi: float) -> List[Fraction]:
    """Все несократимые p/q из [lo, hi] с q <= q_max, по возрастанию"""
    if q_max < 1 or hi < lo:
        return []
    result = []
    for k in range(math.floor(lo), math.floor(hi) + 1):
        if lo <= k <= hi:
            result.append(Fraction(k))
        result.extend(stern_brocot_between(Fraction(k), Fraction(k + 1), q_max, lo, hi))
    return sorted(set(result))
