from .hb import hb_branch, hb_check, hb_root, hb_validate
from .lv import lv_branch, lv_check, lv_hopf, lv_simulate

HANDLERS = {
    "lv-hopf": lv_hopf,
    "lv-check": lv_check,
    "lv-simulate": lv_simulate,
    "lv-branch": lv_branch,
    "hb-root": hb_root,
    "hb-check": hb_check,
    "hb-branch": hb_branch,
    "hb-validate": hb_validate,
}
