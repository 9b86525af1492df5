/** Studio entry point: wires the draft editor, generate button, variant
 * viewers, and the articulation slider to the store. */

import { StudioApi } from "./api.js";
import { addNode, byId, removeNode, resetIds, setLabel, setParent } from "./graph.js";
import { StudioStore } from "./store.js";
import { CATEGORIES, Category, JOINT_TYPES, JointType, LABELS, SemanticLabel } from "./types.js";
import { canGenerate, validateDraft } from "./validate.js";
import { BoxViewer } from "./viewer.js";

const api = new StudioApi("");
const store = new StudioStore(api);

const el = <T extends HTMLElement>(id: string): T => {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found as T;
};

const nodeList = el<HTMLDivElement>("nodes");
const issuesBox = el<HTMLDivElement>("issues");
const generateBtn = el<HTMLButtonElement>("generate");
const addNodeBtn = el<HTMLButtonElement>("add-node");
const categorySel = el<HTMLSelectElement>("category");
const countInput = el<HTMLInputElement>("count");
const seedInput = el<HTMLInputElement>("seed");
const tauSlider = el<HTMLInputElement>("tau");
const tauValue = el<HTMLSpanElement>("tau-value");
const variantsRow = el<HTMLDivElement>("variants");
const statusLine = el<HTMLDivElement>("status");

for (const cat of CATEGORIES) {
  const opt = document.createElement("option");
  opt.value = opt.textContent = cat;
  categorySel.appendChild(opt);
}

function selectOptions(values: readonly string[], current: string): string {
  return values
    .map((v) => `<option value="${v}" ${v === current ? "selected" : ""}>${v}</option>`)
    .join("");
}

function renderNodes(): void {
  nodeList.innerHTML = "";
  for (const node of store.draft.nodes) {
    const row = document.createElement("div");
    row.className = "node-row";
    const parentChoices = store.draft.nodes.filter((n) => n.id !== node.id);
    const locks = [...node.locks].map((l) => `<span class="lock">🔒${l}</span>`).join(" ");
    row.innerHTML = `
      <span class="nid">#${node.id}</span>
      <select data-act="label">${selectOptions(LABELS, node.label)}</select>
      <select data-act="joint">${selectOptions(["(any)", ...JOINT_TYPES], node.jointType ?? "(any)")}</select>
      <select data-act="parent" ${node.parent === null ? "disabled" : ""}>
        ${node.parent === null ? "<option>root</option>" : selectOptions(
          parentChoices.map((n) => String(n.id)), String(node.parent))}
      </select>
      <button data-act="del">✕</button>
      ${locks}`;
    row.querySelector<HTMLSelectElement>('[data-act="label"]')!.onchange = (e) => {
      setLabel(store.draft, node.id, (e.target as HTMLSelectElement).value as SemanticLabel);
      refresh();
    };
    row.querySelector<HTMLSelectElement>('[data-act="joint"]')!.onchange = (e) => {
      const v = (e.target as HTMLSelectElement).value;
      const n = byId(store.draft, node.id)!;
      if (v === "(any)") {
        n.jointType = undefined;
        n.locks.delete("joint_type");
      } else {
        n.jointType = v as JointType;
        n.locks.add("joint_type");
      }
      refresh();
    };
    const parentSel = row.querySelector<HTMLSelectElement>('[data-act="parent"]')!;
    parentSel.onchange = (e) => {
      try {
        setParent(store.draft, node.id, Number((e.target as HTMLSelectElement).value));
      } catch (err) {
        statusLine.textContent = String(err);
      }
      refresh();
    };
    row.querySelector<HTMLButtonElement>('[data-act="del"]')!.onclick = () => {
      try {
        removeNode(store.draft, node.id);
      } catch (err) {
        statusLine.textContent = String(err);
      }
      refresh();
    };
    nodeList.appendChild(row);
  }
}

const viewers: BoxViewer[] = [];

function renderVariants(): void {
  variantsRow.innerHTML = "";
  viewers.length = 0;
  store.variants.forEach((variant, idx) => {
    const cell = document.createElement("div");
    cell.className = "variant";
    const canvas = document.createElement("canvas");
    canvas.width = 320;
    canvas.height = 260;
    const lockBtn = document.createElement("button");
    lockBtn.textContent = "lock boxes";
    lockBtn.onclick = () => {
      store.useAsConstraint(idx, ["bbox"]);
      refresh();
    };
    const caption = document.createElement("div");
    caption.textContent = `seed ${variant.seed}`;
    cell.append(canvas, caption, lockBtn);
    variantsRow.appendChild(cell);
    viewers.push(new BoxViewer(canvas));
  });
  renderPoses();
}

function renderPoses(): void {
  store.variants.forEach((variant, idx) => {
    const corners = store.posesFor(idx);
    viewers[idx]?.setBoxes(corners, variant.object.parts.map((p) => p.label));
  });
}

function refresh(): void {
  renderNodes();
  const issues = validateDraft(store.draft);
  issuesBox.innerHTML = issues.map((i) =>
    `<div class="issue">${i.nodeId !== undefined ? `node ${i.nodeId}: ` : ""}${i.message}</div>`
  ).join("");
  generateBtn.disabled = !canGenerate(store.draft) || store.busy;
  statusLine.textContent = store.busy ? "generating…" : store.lastError ?? "";
}

addNodeBtn.onclick = () => {
  const parent = store.draft.nodes.length === 0 ? null : store.draft.nodes[0].id;
  addNode(store.draft, parent, store.draft.nodes.length === 0 ? "base" : "door");
  refresh();
};

categorySel.onchange = () => {
  store.draft.category = categorySel.value as Category;
  refresh();
};
countInput.onchange = () => {
  store.draft.count = Number(countInput.value);
  refresh();
};
seedInput.onchange = () => {
  store.draft.seed = seedInput.value === "" ? undefined : Number(seedInput.value);
};

generateBtn.onclick = () => {
  store.generate().then(renderVariants).catch(() => refresh());
};

tauSlider.oninput = () => {
  store.setTau(Number(tauSlider.value) / 100);
  tauValue.textContent = store.tau.toFixed(2);
  renderPoses();
};

store.subscribe(refresh);

resetIds();
addNode(store.draft, null, "base");
refresh();

api.health().then((h) => {
  statusLine.textContent = h.checkpoint_loaded ? "model ready" : "no checkpoint loaded (409 on generate)";
}).catch(() => {
  statusLine.textContent = "service unreachable";
});
