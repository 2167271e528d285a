document.getElementById('theme').addEventListener('click', function () {
  document.getElementById('panel').className = 'dark';
});
