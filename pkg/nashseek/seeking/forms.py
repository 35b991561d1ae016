"""実行設定（JSON）の各セクションを検証するフォーム

フォームは辞書をそのまま data として受け取る（HTTP リクエストは経由しない）。
"""
import math

from django import forms
from django.core.exceptions import ValidationError

from .services.graph import GRAPH_PRESETS


def _as_float(value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f'数値ではありません: {value!r}')
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError('有限の数値が必要です。')
    return value


class VectorField(forms.JSONField):
    """数値1つ（全員に同じ値）または数値のリスト"""

    def to_python(self, value):
        value = super().to_python(value)
        if value is None:
            return None
        if isinstance(value, (list, tuple)):
            return [_as_float(v) for v in value]
        return _as_float(value)


class MatrixField(forms.JSONField):
    """数値1つまたは数値の2次元リスト（正方性はサービス側で確認）"""

    def to_python(self, value):
        value = super().to_python(value)
        if value is None:
            return None
        if isinstance(value, (list, tuple)):
            if not all(isinstance(row, (list, tuple)) for row in value):
                raise ValidationError('行列は2次元のリストで指定してください。')
            return [[_as_float(v) for v in row] for row in value]
        return _as_float(value)


class GameSectionForm(forms.Form):
    """game セクション（組み込みゲーム名 + パラメータ、または二次ゲームの係数）"""
    name = forms.CharField(max_length=100)
    params = forms.JSONField(required=False)
    h = forms.JSONField(required=False)
    H = forms.JSONField(required=False)
    v = forms.JSONField(required=False)
    g = forms.JSONField(required=False)

    def clean(self):
        cleaned = super().clean()
        if cleaned.get('name') == 'quadratic':
            if cleaned.get('v') is None or (cleaned.get('h') is None and cleaned.get('H') is None):
                raise ValidationError('二次ゲームには h（または H）と v が必要です。')
        params = cleaned.get('params')
        if params is not None and not isinstance(params, dict):
            self.add_error('params', 'params はオブジェクトで指定してください。')
        return cleaned


class GraphSectionForm(forms.Form):
    preset = forms.ChoiceField(choices=[(p, p) for p in GRAPH_PRESETS], required=False)
    n = forms.IntegerField(min_value=1)
    edges = forms.JSONField(required=False)

    def clean_edges(self):
        edges = self.cleaned_data.get('edges')
        if edges is None:
            return None
        if not isinstance(edges, list) or not all(
            isinstance(e, (list, tuple)) and len(e) == 2 and all(isinstance(v, int) for v in e)
            for e in edges
        ):
            raise ValidationError('edges は [[i, j], ...]（1始まりの整数）で指定してください。')
        return [list(e) for e in edges]


class SeekerSectionForm(forms.Form):
    delta = forms.FloatField()
    kbar = VectorField()
    gains = MatrixField()
    dt = forms.FloatField()
    t_end = forms.FloatField()
    record_every = forms.IntegerField(min_value=1)

    def clean_delta(self):
        delta = self.cleaned_data['delta']
        if not delta > 0:
            raise ValidationError('δ は正である必要があります。')
        return delta

    def clean_dt(self):
        dt = self.cleaned_data['dt']
        if not dt > 0:
            raise ValidationError('dt は正である必要があります。')
        return dt

    def clean(self):
        cleaned = super().clean()
        dt, t_end = cleaned.get('dt'), cleaned.get('t_end')
        if dt is not None and t_end is not None and t_end < dt:
            self.add_error('t_end', 't_end は dt 以上が必要です。')
        return cleaned


class InitialSectionForm(forms.Form):
    x0 = VectorField()
    Y0 = MatrixField(required=False)


class MonotonicitySectionForm(forms.Form):
    box = VectorField()
    samples = forms.IntegerField(min_value=2)
    seed = forms.IntegerField()

    def clean_box(self):
        box = self.cleaned_data['box']
        if not isinstance(box, list) or len(box) != 2 or not box[0] < box[1]:
            raise ValidationError('box は [下限, 上限]（下限 < 上限）で指定してください。')
        return box


class AnalysisSectionForm(forms.Form):
    assumptions = forms.BooleanField(required=False)
    lyapunov = forms.BooleanField(required=False)
    rate = forms.BooleanField(required=False)
    reduced = forms.BooleanField(required=False)
    search_delta = forms.BooleanField(required=False)
    c = forms.FloatField()
    burn_in = forms.FloatField(min_value=0.0, max_value=1.0)
    window = VectorField()
    fd_step = forms.FloatField()
    tol = forms.FloatField()

    def clean_c(self):
        c = self.cleaned_data['c']
        if not 0 < c < 1:
            raise ValidationError('c は (0, 1) の範囲が必要です。')
        return c

    def clean_window(self):
        window = self.cleaned_data['window']
        if not isinstance(window, list) or len(window) != 2 or not 0 <= window[0] < window[1] <= 1:
            raise ValidationError('window は [lo, hi]（0 ≤ lo < hi ≤ 1）で指定してください。')
        return window

    def clean_fd_step(self):
        step = self.cleaned_data['fd_step']
        if not step > 0:
            raise ValidationError('差分ステップは正である必要があります。')
        return step

    def clean_tol(self):
        tol = self.cleaned_data['tol']
        if not tol > 0:
            raise ValidationError('tol は正である必要があります。')
        return tol


class OutputSectionForm(forms.Form):
    dir = forms.CharField(required=False)
    name = forms.CharField(required=False, max_length=200)
    include_estimates = forms.BooleanField(required=False)
