// Device control panels generated from the abstract interaction model.
//
// Widget mapping: boolean -> toggle, enumeration -> dropdown (or radio
// group), numeric -> slider (or stepper); widgetHint overrides the
// default. Non-writable properties render read-only.

import type { DeviceDoc, Literal, PropertyDoc } from './protocol.js';

export type ChangeHandler = (property: string, value: Literal) => void;

export function buildControlPanel(
  device: DeviceDoc,
  values: Record<string, Literal>,
  onChange: ChangeHandler,
): HTMLElement {
  const panel = document.createElement('div');
  panel.className = 'control-panel';
  panel.dataset.deviceId = device.id;

  const title = document.createElement('h3');
  title.textContent = `${device.type}: ${device.id}`;
  panel.appendChild(title);

  for (const property of device.properties) {
    panel.appendChild(buildPropertyRow(property, values[property.name], onChange));
  }
  return panel;
}

function buildPropertyRow(property: PropertyDoc, value: Literal, onChange: ChangeHandler): HTMLElement {
  const row = document.createElement('label');
  row.className = 'panel-row';
  row.dataset.property = property.name;

  const caption = document.createElement('span');
  caption.textContent = property.name;
  row.appendChild(caption);

  const widget = buildWidget(property, value, onChange);
  if (!property.userWritable) {
    widget.classList.add('read-only');
    widget.querySelectorAll('input, select, button').forEach((el) => el.setAttribute('disabled', ''));
    if (widget instanceof HTMLInputElement || widget instanceof HTMLSelectElement) {
      widget.setAttribute('disabled', '');
    }
  }
  row.appendChild(widget);
  return row;
}

function buildWidget(property: PropertyDoc, value: Literal, onChange: ChangeHandler): HTMLElement {
  switch (property.kind) {
    case 'boolean':
      return buildToggle(property, value === true, onChange);
    case 'enumeration':
      return property.widgetHint === 'radio'
        ? buildRadioGroup(property, String(value), onChange)
        : buildDropdown(property, String(value), onChange);
    case 'numeric':
      return property.widgetHint === 'stepper'
        ? buildStepper(property, Number(value), onChange)
        : buildSlider(property, Number(value), onChange);
  }
}

function buildToggle(property: PropertyDoc, value: boolean, onChange: ChangeHandler): HTMLElement {
  const input = document.createElement('input');
  input.type = 'checkbox';
  input.className = 'widget-toggle';
  input.checked = value;
  // click covers pointer and keyboard activation and fires exactly once
  input.addEventListener('click', () => onChange(property.name, input.checked));
  return input;
}

function buildDropdown(property: PropertyDoc, value: string, onChange: ChangeHandler): HTMLElement {
  const select = document.createElement('select');
  select.className = 'widget-dropdown';
  for (const option of property.values ?? []) {
    const element = document.createElement('option');
    element.value = option;
    element.textContent = option;
    select.appendChild(element);
  }
  select.value = value;
  select.addEventListener('change', () => onChange(property.name, select.value));
  return select;
}

function buildRadioGroup(property: PropertyDoc, value: string, onChange: ChangeHandler): HTMLElement {
  const group = document.createElement('fieldset');
  group.className = 'widget-radio';
  for (const option of property.values ?? []) {
    const label = document.createElement('label');
    const input = document.createElement('input');
    input.type = 'radio';
    input.name = property.name;
    input.value = option;
    input.checked = option === value;
    input.addEventListener('change', () => {
      if (input.checked) onChange(property.name, option);
    });
    label.appendChild(input);
    label.appendChild(document.createTextNode(option));
    group.appendChild(label);
  }
  return group;
}

function buildSlider(property: PropertyDoc, value: number, onChange: ChangeHandler): HTMLElement {
  const wrapper = document.createElement('span');
  const input = document.createElement('input');
  input.type = 'range';
  input.className = 'widget-slider';
  input.min = String(property.min ?? 0);
  input.max = String(property.max ?? 100);
  input.step = String(property.step ?? 1);
  input.value = String(value);
  const display = document.createElement('output');
  display.textContent = String(value);
  input.addEventListener('change', () => {
    display.textContent = input.value;
    onChange(property.name, Number(input.value));
  });
  wrapper.appendChild(input);
  wrapper.appendChild(display);
  return wrapper;
}

function buildStepper(property: PropertyDoc, value: number, onChange: ChangeHandler): HTMLElement {
  const input = document.createElement('input');
  input.type = 'number';
  input.className = 'widget-stepper';
  input.min = String(property.min ?? 0);
  input.max = String(property.max ?? 100);
  input.step = String(property.step ?? 1);
  input.value = String(value);
  input.addEventListener('change', () => onChange(property.name, Number(input.value)));
  return input;
}

// Re-sync a rendered panel with confirmed values (server echo), leaving
// widget identity (and focus) intact.
export function updatePanelValues(panel: HTMLElement, values: Record<string, Literal>): void {
  panel.querySelectorAll<HTMLElement>('.panel-row').forEach((row) => {
    const name = row.dataset.property;
    if (!name || !(name in values)) return;
    const value = values[name];
    const toggle = row.querySelector<HTMLInputElement>('.widget-toggle');
    if (toggle) toggle.checked = value === true;
    const dropdown = row.querySelector<HTMLSelectElement>('.widget-dropdown');
    if (dropdown) dropdown.value = String(value);
    const slider = row.querySelector<HTMLInputElement>('.widget-slider');
    if (slider) {
      slider.value = String(value);
      const output = row.querySelector('output');
      if (output) output.textContent = String(value);
    }
    const stepper = row.querySelector<HTMLInputElement>('.widget-stepper');
    if (stepper) stepper.value = String(value);
    row.querySelectorAll<HTMLInputElement>('.widget-radio input').forEach((radio) => {
      radio.checked = radio.value === String(value);
    });
  });
}
